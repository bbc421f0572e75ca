#pragma once

#include <array>
#include <span>
#include <vector>

#include "tvnet/grid.hpp"
#include "tvnet/grid_ops.hpp"

namespace tvnet {

/// How the initial flow at the coarsest pyramid level is parameterized.
enum class InitMode {
  zero,             // no trainable values
  constant_vector,  // one trainable 2-vector broadcast over the level
  full_field,       // a trainable field sized to the coarsest level
};

/// Trainable values of the unrolled solver. The kernels are tied across all
/// iterations, warps and scales.
///
/// Flattened order: u0 values (constant: u1,u2; field: all of u1 then all of
/// u2, row-major), then taps of image_x, image_y, flow_x, flow_y, div_x, div_y.
struct TVNetParams {
  InitMode u0_mode = InitMode::zero;
  std::array<double, 2> u0_constant{0.0, 0.0};
  FlowField u0_field;
  DifferenceKernels kernels = DifferenceKernels::initial();

  static TVNetParams initial() { return {}; }
  static TVNetParams constant(double u1, double u2);
  static TVNetParams field(FlowField u0);

  /// Initial flow for a coarsest level of the given size.
  FlowField initial_flow(int height, int width) const;

  std::size_t u0_count() const;
  std::size_t parameter_count() const { return u0_count() + kernels.tap_count(); }

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  friend bool operator==(const TVNetParams&, const TVNetParams&) = default;
};

/// Gradient of a scalar loss with respect to every value of TVNetParams.
/// Shares the parameter layout, including the u0 mode and field shape.
struct GradientSet {
  TVNetParams values;

  /// Zero gradient laid out like params.
  static GradientSet zeros_like(const TVNetParams& params);

  std::vector<double> flatten() const { return values.flatten(); }
  bool all_finite() const;
  void accumulate(const GradientSet& other);

  friend bool operator==(const GradientSet&, const GradientSet&) = default;
};

}  // namespace tvnet
