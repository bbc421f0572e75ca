#include "tvnet/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tvnet {
namespace {

Resampler::Taps area_taps(int in, int out, double factor) {
  Resampler::Taps taps(static_cast<std::size_t>(out));
  const double span = 1.0 / factor;
  for (int o = 0; o < out; ++o) {
    const double lo = o * span;
    const double hi = std::min((o + 1) * span, static_cast<double>(in));
    for (int k = static_cast<int>(std::floor(lo)); k < in && k < hi; ++k) {
      const double overlap = std::min(hi, k + 1.0) - std::max(lo, static_cast<double>(k));
      if (overlap > 0.0) taps[o].emplace_back(k, overlap / (hi - lo));
    }
  }
  return taps;
}

Resampler::Taps bilinear_taps(int coarse, int fine, double factor) {
  Resampler::Taps taps(static_cast<std::size_t>(fine));
  for (int f = 0; f < fine; ++f) {
    double c = (f + 0.5) * factor - 0.5;
    c = std::clamp(c, 0.0, static_cast<double>(coarse - 1));
    const int c0 = static_cast<int>(std::floor(c));
    const double t = c - c0;
    if (c0 + 1 < coarse && t > 0.0) {
      taps[f] = {{c0, 1.0 - t}, {c0 + 1, t}};
    } else {
      taps[f] = {{c0, 1.0}};
    }
  }
  return taps;
}

}  // namespace

int decimated_size(int size, double factor) {
  return static_cast<int>(std::floor(size * factor + 1e-9));
}

Resampler::Resampler(int in_height, int in_width, Taps along_x, Taps along_y)
    : in_height_(in_height), in_width_(in_width), x_(std::move(along_x)), y_(std::move(along_y)) {}

Resampler Resampler::area_downsample(int height, int width, double factor) {
  if (!(factor > 0.0 && factor < 1.0)) {
    throw std::invalid_argument("scale factor must lie in (0,1)");
  }
  const int oh = decimated_size(height, factor);
  const int ow = decimated_size(width, factor);
  if (oh < 1 || ow < 1) {
    throw std::invalid_argument("image " + std::to_string(height) + "x" + std::to_string(width) +
                                " too small to decimate by " + std::to_string(factor));
  }
  return {height, width, area_taps(width, ow, factor), area_taps(height, oh, factor)};
}

Resampler Resampler::bilinear_upsample(int coarse_height, int coarse_width, int fine_height,
                                       int fine_width, double factor) {
  return {coarse_height, coarse_width, bilinear_taps(coarse_width, fine_width, factor),
          bilinear_taps(coarse_height, fine_height, factor)};
}

Grid Resampler::apply(const Grid& g) const {
  if (g.height() != in_height_ || g.width() != in_width_) {
    throw std::invalid_argument("resampler input shape mismatch");
  }
  Grid tmp(in_height_, out_width());
  for (int y = 0; y < in_height_; ++y) {
    for (int x = 0; x < out_width(); ++x) {
      double acc = 0.0;
      for (const auto& [k, wgt] : x_[x]) acc += wgt * g.at(k, y);
      tmp.at(x, y) = acc;
    }
  }
  Grid out(out_height(), out_width());
  for (int y = 0; y < out_height(); ++y) {
    for (int x = 0; x < out_width(); ++x) {
      double acc = 0.0;
      for (const auto& [k, wgt] : y_[y]) acc += wgt * tmp.at(x, k);
      out.at(x, y) = acc;
    }
  }
  return out;
}

Grid Resampler::apply_adjoint(const Grid& g) const {
  if (g.height() != out_height() || g.width() != out_width()) {
    throw std::invalid_argument("resampler adjoint input shape mismatch");
  }
  Grid tmp(in_height_, out_width());
  for (int y = 0; y < out_height(); ++y) {
    for (int x = 0; x < out_width(); ++x) {
      for (const auto& [k, wgt] : y_[y]) tmp.at(x, k) += wgt * g.at(x, y);
    }
  }
  Grid out(in_height_, in_width_);
  for (int y = 0; y < in_height_; ++y) {
    for (int x = 0; x < out_width(); ++x) {
      for (const auto& [k, wgt] : x_[x]) out.at(k, y) += wgt * tmp.at(x, y);
    }
  }
  return out;
}

std::vector<Resampler> build_pyramid(int height, int width, int levels, double factor) {
  if (levels < 1) throw std::invalid_argument("pyramid needs at least one level");
  std::vector<Resampler> steps;
  int h = height;
  int w = width;
  for (int l = 1; l < levels; ++l) {
    if (decimated_size(h, factor) < 1 || decimated_size(w, factor) < 1) {
      throw std::invalid_argument("image " + std::to_string(height) + "x" +
                                  std::to_string(width) + " too small for " +
                                  std::to_string(levels) + " pyramid levels");
    }
    steps.push_back(Resampler::area_downsample(h, w, factor));
    h = steps.back().out_height();
    w = steps.back().out_width();
  }
  return steps;
}

}  // namespace tvnet
