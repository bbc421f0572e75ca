#pragma once

#include <vector>

#include "tvnet/grid.hpp"

namespace tvnet {

enum class Orientation { horizontal, vertical };

/// One-dimensional difference kernel with 2 or 3 taps.
///
/// Length-2 kernels [a, b] are forward aligned: out(k) = a*g(k) + b*g(k+1).
/// Length-3 kernels [a, b, c] are centered:   out(k) = a*g(k+1) + b*g(k) + c*g(k-1).
/// Samples outside the grid read as zero.
struct Kernel1D {
  std::vector<double> taps;
  Orientation orientation = Orientation::horizontal;

  friend bool operator==(const Kernel1D&, const Kernel1D&) = default;
};

/// Trainable difference kernels shared by every layer of the unrolled solver.
struct DifferenceKernels {
  Kernel1D image_x;  // central difference, starts at [0.5, 0, -0.5]
  Kernel1D image_y;
  Kernel1D flow_x;   // forward difference, starts at [-1, 1]
  Kernel1D flow_y;
  Kernel1D div_x;    // backward difference on shifted duals, starts at [-1, 1]
  Kernel1D div_y;

  static DifferenceKernels initial();

  /// Number of scalar taps across all six kernels.
  std::size_t tap_count() const;

  friend bool operator==(const DifferenceKernels&, const DifferenceKernels&) = default;
};

/// Gradient of a scalar objective with respect to the taps of a kernel pair.
struct KernelPairGrad {
  std::vector<double> dx;
  std::vector<double> dy;
};

Grid convolve_same(const Grid& grid, const Kernel1D& kernel);

struct ConvolveVjp {
  Grid d_grid;
  std::vector<double> d_taps;
};
ConvolveVjp convolve_same_vjp(const Grid& grid, const Kernel1D& kernel, const Grid& upstream);

/// Central-difference image gradient; both boundary columns (rows) are zeroed.
GradientPair image_gradient(const Image& img, const Kernel1D& kx, const Kernel1D& ky);

/// Forward-difference gradient of one flow component; last column (row) zeroed.
GradientPair flow_gradient(const Grid& field, const Kernel1D& kx, const Kernel1D& ky);

/// Backward-difference divergence of a dual field, boundary rows/columns
/// overwritten with the one-sided values p(0) and -p(W-2).
Grid divergence(const DualField& p, const Kernel1D& kx, const Kernel1D& ky);

struct GradientOpVjp {
  Grid d_input;
  KernelPairGrad d_kernels;
};
GradientOpVjp image_gradient_vjp(const Image& img, const Kernel1D& kx, const Kernel1D& ky,
                                 const GradientPair& upstream);
GradientOpVjp flow_gradient_vjp(const Grid& field, const Kernel1D& kx, const Kernel1D& ky,
                                const GradientPair& upstream);

struct DivergenceVjp {
  DualField d_p;
  KernelPairGrad d_kernels;
};
DivergenceVjp divergence_vjp(const DualField& p, const Kernel1D& kx, const Kernel1D& ky,
                             const Grid& upstream);

/// Samples img at (x + u1, y + u2) with the bilinear hat kernel; samples
/// outside the grid contribute zero.
Image warp_bilinear(const Image& img, const FlowField& flow);

struct WarpVjp {
  Grid d_img;
  FlowField d_flow;
};

/// Exact vector-Jacobian product of warp_bilinear. Where a sample position is
/// an integer the one-sided slopes are averaged.
WarpVjp warp_bilinear_vjp(const Image& img, const FlowField& flow, const Grid& upstream);

}  // namespace tvnet
