#include "tvnet/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace tvnet {
namespace {

constexpr int RY = 15;
constexpr int YG = 6;
constexpr int GC = 4;
constexpr int CB = 11;
constexpr int BM = 13;
constexpr int MR = 6;
constexpr int kWheelSize = RY + YG + GC + CB + BM + MR;

using Wheel = std::array<std::array<double, 3>, kWheelSize>;

Wheel make_wheel() {
  Wheel w{};
  int k = 0;
  for (int i = 0; i < RY; ++i) w[k++] = {1.0, double(i) / RY, 0.0};
  for (int i = 0; i < YG; ++i) w[k++] = {1.0 - double(i) / YG, 1.0, 0.0};
  for (int i = 0; i < GC; ++i) w[k++] = {0.0, 1.0, double(i) / GC};
  for (int i = 0; i < CB; ++i) w[k++] = {0.0, 1.0 - double(i) / CB, 1.0};
  for (int i = 0; i < BM; ++i) w[k++] = {double(i) / BM, 0.0, 1.0};
  for (int i = 0; i < MR; ++i) w[k++] = {1.0, 0.0, 1.0 - double(i) / MR};
  return w;
}

const Wheel& wheel() {
  static const Wheel w = make_wheel();
  return w;
}

}  // namespace

Rgb flow_vector_color(double u1, double u2, double max_magnitude) {
  if (!std::isfinite(u1) || !std::isfinite(u2)) throw std::invalid_argument("flow_to_color: non-finite flow");
  const double rad = std::hypot(u1, u2) / max_magnitude;
  double turn = std::atan2(u2, u1) / (2.0 * std::numbers::pi);
  if (turn < 0.0) turn += 1.0;
  const double fk = turn * kWheelSize;
  const int k0 = static_cast<int>(fk) % kWheelSize;
  const int k1 = (k0 + 1) % kWheelSize;
  const double f = fk - std::floor(fk);

  Rgb out{};
  for (int c = 0; c < 3; ++c) {
    double col = (1.0 - f) * wheel()[k0][c] + f * wheel()[k1][c];
    col = rad <= 1.0 ? 1.0 - rad * (1.0 - col) : col * 0.75;
    out[c] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(col, 0.0, 1.0)));
  }
  return out;
}

double magnitude_percentile99(const FlowField& flow) {
  std::vector<double> mags(flow.size());
  for (std::size_t k = 0; k < mags.size(); ++k) mags[k] = std::hypot(flow.u1[k], flow.u2[k]);
  if (mags.empty()) return 0.0;
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(mags.size())));
  const std::size_t idx = std::max<std::size_t>(rank, 1) - 1;
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(idx), mags.end());
  return mags[idx];
}

ColorImage flow_to_color(const FlowField& flow, std::optional<double> max_magnitude) {
  double scale = max_magnitude ? *max_magnitude : magnitude_percentile99(flow);
  if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
  ColorImage img{flow.height(), flow.width(), std::vector<std::uint8_t>(3 * flow.size())};
  for (std::size_t k = 0; k < flow.size(); ++k) {
    const Rgb c = flow_vector_color(flow.u1[k], flow.u2[k], scale);
    std::copy(c.begin(), c.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>(3 * k));
  }
  return img;
}

}  // namespace tvnet
