#pragma once

#include <utility>
#include <vector>

#include "tvnet/grid.hpp"

namespace tvnet {

/// Separable linear resampling operator, stored as sparse 1-D tap lists per
/// output index. Used for both the image pyramid and flow upsampling, and
/// able to apply its own transpose for the backward pass.
class Resampler {
 public:
  using Taps = std::vector<std::vector<std::pair<int, double>>>;

  Resampler(int in_height, int in_width, Taps along_x, Taps along_y);

  /// Area-averaging decimation; output side = floor(side * factor).
  static Resampler area_downsample(int height, int width, double factor);

  /// Bilinear interpolation from a coarse grid onto a finer one, with the
  /// coarse pixel o centred at fine coordinate (o + 0.5) / factor - 0.5 and
  /// edge samples clamped.
  static Resampler bilinear_upsample(int coarse_height, int coarse_width, int fine_height,
                                     int fine_width, double factor);

  int in_height() const noexcept { return in_height_; }
  int in_width() const noexcept { return in_width_; }
  int out_height() const noexcept { return static_cast<int>(y_.size()); }
  int out_width() const noexcept { return static_cast<int>(x_.size()); }

  Grid apply(const Grid& g) const;
  Grid apply_adjoint(const Grid& g) const;

 private:
  int in_height_;
  int in_width_;
  Taps x_;
  Taps y_;
};

/// Side length after one decimation step.
int decimated_size(int size, double factor);

/// Resamplers from each pyramid level to the next coarser one; level 0 is the
/// input resolution. Throws std::invalid_argument if a level would vanish.
std::vector<Resampler> build_pyramid(int height, int width, int levels, double factor);

}  // namespace tvnet
