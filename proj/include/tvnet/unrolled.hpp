#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "tvnet/grid.hpp"
#include "tvnet/losses.hpp"
#include "tvnet/params.hpp"
#include "tvnet/pyramid.hpp"
#include "tvnet/solver.hpp"

namespace tvnet {

/// Everything the reverse pass needs from one forward evaluation of the
/// unrolled solver. Per iteration it keeps the incoming primal/dual state and
/// the thresholding branch taken at each pixel; the remaining intermediates
/// are recomputed from those during backward.
class Tape {
 public:
  struct Iteration {
    SolverState before;
    std::vector<VCase> branches;
  };
  struct Warp {
    FlowField u_start;
    TaylorLinearization lin;
    std::vector<Iteration> iterations;
  };
  struct Scale {
    int level = 0;
    Image I1;              // I1 at this pyramid level
    GradientPair grad_I1;  // its (unwarped) gradient
    FlowField u_init;
    std::vector<Warp> warps;
  };

  const SolverConfig& config() const noexcept { return config_; }
  const TVNetParams& params() const noexcept { return params_; }
  const std::vector<Scale>& scales() const noexcept { return scales_; }
  const std::vector<Resampler>& pyramid() const noexcept { return pyramid_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }

  /// Number of unrolled iteration layers (n_scales * n_warps * n_iters).
  std::size_t layer_count() const;
  /// Number of linearization records (n_scales * n_warps).
  std::size_t linearization_count() const;
  /// Approximate payload size in bytes.
  std::size_t byte_size() const;

 private:
  friend class TapeRecorder;

  SolverConfig config_;
  TVNetParams params_;
  int height_ = 0;
  int width_ = 0;
  std::vector<Resampler> pyramid_;
  std::vector<Scale> scales_;  // coarsest first, in execution order
};

struct ForwardResult {
  FlowField flow;
  Tape tape;
};

/// Runs the unrolled network: the multiscale solver with early stopping
/// disabled, recording a tape. The flow is bit-identical to
/// solve_multiscale(I0, I1, cfg with eps_stop = 0, params).
ForwardResult forward(const Image& I0, const Image& I1, const TVNetParams& params,
                      const SolverConfig& cfg);

struct BackwardResult {
  GradientSet grads;
  Grid d_I0;
  Grid d_I1;
};

/// Reverse-mode product of d_flow with the Jacobian of the recorded forward
/// pass. The thresholding branch is held fixed and contributes no gradient.
BackwardResult backward(const Tape& tape, const FlowField& d_flow);

using LossFunction = std::function<LossValue(const FlowField&)>;

struct GradCheckProbe {
  std::size_t index;
  double analytic;
  double numeric;
  double relative_error;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::vector<GradCheckProbe> probes;
};

/// Compares backward() against central differences of the loss on n_probes
/// parameters drawn without replacement from a generator seeded with seed.
/// Relative error uses the denominator max(|analytic|, |numeric|, 1e-12).
GradCheckReport grad_check(const Image& I0, const Image& I1, const TVNetParams& params,
                           const SolverConfig& cfg, const LossFunction& loss, int n_probes,
                           double step, std::uint64_t seed = 0);

}  // namespace tvnet
