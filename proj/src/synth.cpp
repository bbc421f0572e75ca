#include "tvnet/synth.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvnet {
namespace {

// Uniform double in [lo, hi) built from raw engine bits so the stream does not
// depend on the standard library's distribution implementation.
class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : engine_(seed) {}
  double operator()(double lo, double hi) {
    const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
  }

 private:
  std::mt19937_64 engine_;
};

using Field = std::function<double(double, double)>;

Field texture(int size, Uniform& rnd) {
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves;
  const double base = 2.0 * std::numbers::pi / size;
  for (int k = 0; k < 24; ++k) {
    // periods between size/6 and size/1.5 keep the texture smooth at pixel scale
    const double freq = base * rnd(1.5, 6.0);
    const double angle = rnd(0.0, 2.0 * std::numbers::pi);
    waves.push_back({freq * std::cos(angle), freq * std::sin(angle),
                     rnd(0.0, 2.0 * std::numbers::pi), rnd(0.5, 1.0)});
  }
  return [waves](double x, double y) {
    double acc = 0.0;
    for (const Wave& w : waves) acc += w.amp * std::cos(w.kx * x + w.ky * y + w.phase);
    return 0.5 + 0.45 * std::tanh(acc / 3.0);
  };
}

Field blobs(int size, Uniform& rnd) {
  struct Blob {
    double cx, cy, inv2s2, amp;
  };
  std::vector<Blob> list;
  const int count = 10 + size / 8;
  for (int k = 0; k < count; ++k) {
    const double sigma = rnd(size / 14.0, size / 7.0);
    list.push_back({rnd(-0.1 * size, 1.1 * size), rnd(-0.1 * size, 1.1 * size),
                    1.0 / (2.0 * sigma * sigma), rnd(-1.5, 1.5)});
  }
  return [list](double x, double y) {
    double acc = 0.0;
    for (const Blob& b : list) {
      const double dx = x - b.cx;
      const double dy = y - b.cy;
      acc += b.amp * std::exp(-(dx * dx + dy * dy) * b.inv2s2);
    }
    return 0.5 + 0.45 * std::tanh(acc);
  };
}

}  // namespace

SynthKind parse_synth_kind(std::string_view name) {
  if (name == "translate") return SynthKind::translate;
  if (name == "rotate") return SynthKind::rotate;
  if (name == "blob_translate" || name == "blob") return SynthKind::blob_translate;
  throw std::invalid_argument("unknown synthetic kind '" + std::string(name) + "'");
}

SyntheticPair synth_pair(SynthKind kind, int size, double magnitude, std::uint64_t seed) {
  if (size < 4) throw std::invalid_argument("synthetic image size must be at least 4");
  if (!(std::isfinite(magnitude) && std::abs(magnitude) <= size / 4.0)) {
    throw std::invalid_argument("synthetic magnitude must not exceed size/4");
  }
  Uniform rnd(seed);
  const Field f = kind == SynthKind::blob_translate ? blobs(size, rnd) : texture(size, rnd);

  SyntheticPair out{Image(size, size), Image(size, size), FlowField(size, size)};
  const double centre = (size - 1) / 2.0;
  const double angle = kind == SynthKind::rotate ? magnitude / (size / 2.0) : 0.0;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double du = magnitude;
      double dv = 0.0;
      if (kind == SynthKind::rotate) {
        const double rx = x - centre;
        const double ry = y - centre;
        du = c * rx - s * ry - rx;
        dv = s * rx + c * ry - ry;
      }
      out.gt.u1.at(x, y) = du;
      out.gt.u2.at(x, y) = dv;
      out.I1.at(x, y) = f(x, y);
      out.I0.at(x, y) = f(x + du, y + dv);
    }
  }
  return out;
}

}  // namespace tvnet
