#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "tvnet/grid.hpp"

namespace tvnet::testing {

inline Grid random_grid(int h, int w, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Grid g(h, w);
  for (auto& v : g.values()) v = dist(rng);
  return g;
}

inline FlowField random_flow(int h, int w, std::mt19937_64& rng, double mag = 1.0) {
  return FlowField(random_grid(h, w, rng, -mag, mag), random_grid(h, w, rng, -mag, mag));
}

/// Smooth random image in [0,1]: a few low-frequency cosines.
inline Image smooth_image(int h, int w, std::mt19937_64& rng, int waves = 4) {
  std::uniform_real_distribution<double> freq(0.15, 0.6);
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  Image img(h, w, 0.5);
  for (int k = 0; k < waves; ++k) {
    const double fx = freq(rng), fy = freq(rng), ph = phase(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(x, y) += 0.4 / waves * std::cos(fx * x + fy * y + ph);
  }
  return img;
}

inline double dot(const Grid& a, const Grid& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double max_abs_diff(const Grid& a, const Grid& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

/// Fresh empty directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("tvnet_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace tvnet::testing
