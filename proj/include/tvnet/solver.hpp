#pragma once

#include <cstdint>
#include <vector>

#include "tvnet/grid.hpp"
#include "tvnet/grid_ops.hpp"
#include "tvnet/params.hpp"

namespace tvnet {

/// Hyper-parameters of the TV-L1 iteration and its coarse-to-fine driver.
///
/// lambda is the data-term weight for brightness in [0,1]; the default equals
/// the customary 0.15 on a 0..255 brightness scale (see README).
struct SolverConfig {
  double lambda = 0.15 * 255.0;
  double theta = 0.3;
  double tau = 0.25;
  double eps_stop = 0.01;  // RMS change of u that ends the inner loop; 0 disables
  double eps_div = 1e-12;
  int n_scales = 5;
  int n_warps = 5;
  int n_iters = 50;
  double scale_factor = 0.5;

  /// Throws std::invalid_argument for out-of-range fields.
  void validate() const;
  int total_iterations() const { return n_scales * n_warps * n_iters; }

  /// The same configuration with the architecture replaced.
  SolverConfig with_shape(int scales, int warps, int iters) const;

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

/// First-order expansion of the brightness residual around a flow u0:
/// rho(u) = grad_warped . u + rho_const.
struct TaylorLinearization {
  Image I1_warped;
  GradientPair grad_warped;
  Grid rho_const;
};

struct SolverState {
  FlowField u;
  DualField p1;  // dual of u1
  DualField p2;  // dual of u2

  static SolverState start(FlowField u0);
  friend bool operator==(const SolverState&, const SolverState&) = default;
};

/// Which branch of the thresholding step produced v at a pixel.
enum class VCase : std::uint8_t {
  step_up,    // rho < -lambda*theta*|g|^2: v = u + lambda*theta*g
  step_down,  // rho >  lambda*theta*|g|^2: v = u - lambda*theta*g
  project,    // otherwise: v = u - rho*g / (|g|^2 + eps)
};

struct VPixel {
  double v1;
  double v2;
  VCase branch;
};

/// Pointwise minimizer of |u - v|^2 / (2 theta) + lambda |rho(v)|, with the
/// division softened by eps. lt = lambda * theta.
VPixel v_update_pixel(double u1, double u2, double rho, double gx, double gy, double lt,
                      double eps);

TaylorLinearization linearize(const Image& I0, const Image& I1, const FlowField& u0,
                              const DifferenceKernels& kernels);

/// Same as above with the gradient of I1 already computed (gradient, then warp).
TaylorLinearization linearize(const Image& I0, const Image& I1, const GradientPair& grad_I1,
                              const FlowField& u0);

/// rho(u) = rho_const + gx*u1 + gy*u2.
Grid residual(const FlowField& u, const TaylorLinearization& lin);

FlowField v_update(const FlowField& u, const TaylorLinearization& lin, double lambda,
                   double theta, double eps_div, std::vector<VCase>* branches = nullptr);

FlowField u_update(const FlowField& v, const DualField& p1, const DualField& p2, double theta,
                   const DifferenceKernels& kernels);

/// p <- (p + (tau/theta) g) / (1 + (tau/theta) sqrt(gx^2 + gy^2 + eps)).
DualField p_update(const DualField& p, const GradientPair& grad_u, double tau, double theta,
                   double eps_div);

/// Mean over pixels of |u_new - u_old|^2 summed over both components.
double stopping_measure(const FlowField& u_new, const FlowField& u_old);

/// Hooks into the solver loop. The unrolled graph records its tape through
/// these; tests use them to inspect intermediate states.
class SolverObserver {
 public:
  virtual ~SolverObserver() = default;
  virtual void on_scale_begin(int /*level*/, const Image& /*I0*/, const Image& /*I1*/,
                              const GradientPair& /*grad_I1*/, const FlowField& /*u_init*/) {}
  virtual void on_warp_begin(const FlowField& /*u_start*/, const TaylorLinearization& /*lin*/) {}
  virtual void on_iteration(const SolverState& /*before*/, const std::vector<VCase>& /*branches*/,
                            const SolverState& /*after*/) {}
  virtual void on_scale_end(const FlowField& /*u_final*/) {}
};

SolverState inner_iterations(SolverState state, const TaylorLinearization& lin,
                             const SolverConfig& cfg, const DifferenceKernels& kernels,
                             SolverObserver* observer = nullptr);

/// n_warps rounds of linearize + inner_iterations; duals persist across warps.
FlowField solve_single_scale(const Image& I0, const Image& I1, const FlowField& u0,
                             const SolverConfig& cfg, const DifferenceKernels& kernels,
                             SolverObserver* observer = nullptr);

/// Coarse-to-fine TV-L1. The initial flow at the coarsest level and the
/// difference kernels come from params.
FlowField solve_multiscale(const Image& I0, const Image& I1, const SolverConfig& cfg,
                           const TVNetParams& params = {}, SolverObserver* observer = nullptr);

/// sum |grad u1| + |grad u2| + |u - v|^2 / (2 theta) + lambda |rho(v)|.
double relaxed_energy(const FlowField& u, const FlowField& v, const TaylorLinearization& lin,
                      double lambda, double theta, const DifferenceKernels& kernels);

}  // namespace tvnet
