#include "tvnet/grid_ops.hpp"

#include <cmath>
#include <string>

namespace tvnet {
namespace {

// Addresses a grid as a set of 1-D lines running along one axis.
struct Lines {
  int count;
  int length;
  std::size_t stride;     // step between neighbours on a line
  std::size_t line_step;  // step between the first samples of two lines

  std::size_t index(int line, int k) const {
    return static_cast<std::size_t>(line) * line_step + static_cast<std::size_t>(k) * stride;
  }
};

Lines lines_along(const Grid& g, Orientation o) {
  const auto w = static_cast<std::size_t>(g.width());
  if (o == Orientation::horizontal) return {g.height(), g.width(), 1, w};
  return {g.width(), g.height(), w, 1};
}

void check_kernel(const Kernel1D& k, Orientation expected, const char* what) {
  if (k.taps.size() != 2 && k.taps.size() != 3) {
    throw std::invalid_argument(std::string(what) + ": kernel length must be 2 or 3, got " +
                                std::to_string(k.taps.size()));
  }
  if (k.orientation != expected) {
    throw std::invalid_argument(std::string(what) + ": kernel has the wrong orientation");
  }
}

void check_grid(const Grid& g, const char* what) {
  if (g.empty()) throw std::invalid_argument(std::string(what) + ": empty grid");
}

// Zeroes the samples at line position k on every line.
void zero_position(Grid& g, Orientation o, int k) {
  const Lines ln = lines_along(g, o);
  if (k < 0 || k >= ln.length) return;
  for (int l = 0; l < ln.count; ++l) g[ln.index(l, k)] = 0.0;
}

// Shifts every line by one sample towards larger k, the first sample becomes 0.
Grid shift_forward(const Grid& g, Orientation o) {
  Grid out(g.height(), g.width());
  const Lines ln = lines_along(g, o);
  for (int l = 0; l < ln.count; ++l) {
    for (int k = 1; k < ln.length; ++k) out[ln.index(l, k)] = g[ln.index(l, k - 1)];
  }
  return out;
}

// Transpose of shift_forward.
void shift_forward_adjoint_add(const Grid& upstream, Orientation o, Grid& into) {
  const Lines ln = lines_along(upstream, o);
  for (int l = 0; l < ln.count; ++l) {
    for (int k = 0; k + 1 < ln.length; ++k) into[ln.index(l, k)] += upstream[ln.index(l, k + 1)];
  }
}

// One component of the divergence: conv of the shifted dual, then the
// one-sided values of the backward difference written on both ends.
Grid divergence_part(const Grid& p, const Kernel1D& k) {
  Grid out = convolve_same(shift_forward(p, k.orientation), k);
  const Lines ln = lines_along(p, k.orientation);
  for (int l = 0; l < ln.count; ++l) {
    if (ln.length == 1) {
      out[ln.index(l, 0)] = 0.0;
      continue;
    }
    out[ln.index(l, 0)] = p[ln.index(l, 0)];
    out[ln.index(l, ln.length - 1)] = -p[ln.index(l, ln.length - 2)];
  }
  return out;
}

void divergence_part_vjp(const Grid& p, const Kernel1D& k, const Grid& upstream, Grid& d_p,
                         std::vector<double>& d_taps) {
  const Lines ln = lines_along(p, k.orientation);
  Grid masked = upstream;
  zero_position(masked, k.orientation, 0);
  zero_position(masked, k.orientation, ln.length - 1);
  ConvolveVjp conv = convolve_same_vjp(shift_forward(p, k.orientation), k, masked);
  shift_forward_adjoint_add(conv.d_grid, k.orientation, d_p);
  d_taps = std::move(conv.d_taps);
  if (ln.length == 1) return;
  for (int l = 0; l < ln.count; ++l) {
    d_p[ln.index(l, 0)] += upstream[ln.index(l, 0)];
    d_p[ln.index(l, ln.length - 2)] -= upstream[ln.index(l, ln.length - 1)];
  }
}

}  // namespace

DifferenceKernels DifferenceKernels::initial() {
  const auto h = Orientation::horizontal;
  const auto v = Orientation::vertical;
  return {
      {{0.5, 0.0, -0.5}, h}, {{0.5, 0.0, -0.5}, v},
      {{-1.0, 1.0}, h},      {{-1.0, 1.0}, v},
      {{-1.0, 1.0}, h},      {{-1.0, 1.0}, v},
  };
}

std::size_t DifferenceKernels::tap_count() const {
  return image_x.taps.size() + image_y.taps.size() + flow_x.taps.size() + flow_y.taps.size() +
         div_x.taps.size() + div_y.taps.size();
}

Grid convolve_same(const Grid& grid, const Kernel1D& kernel) {
  check_grid(grid, "convolve_same");
  check_kernel(kernel, kernel.orientation, "convolve_same");
  Grid out(grid.height(), grid.width());
  const Lines ln = lines_along(grid, kernel.orientation);
  const auto& t = kernel.taps;
  for (int l = 0; l < ln.count; ++l) {
    for (int k = 0; k < ln.length; ++k) {
      const double here = grid[ln.index(l, k)];
      const double next = k + 1 < ln.length ? grid[ln.index(l, k + 1)] : 0.0;
      double v;
      if (t.size() == 2) {
        v = t[0] * here + t[1] * next;
      } else {
        const double prev = k > 0 ? grid[ln.index(l, k - 1)] : 0.0;
        v = t[0] * next + t[1] * here + t[2] * prev;
      }
      out[ln.index(l, k)] = v;
    }
  }
  return out;
}

ConvolveVjp convolve_same_vjp(const Grid& grid, const Kernel1D& kernel, const Grid& upstream) {
  check_grid(grid, "convolve_same_vjp");
  check_kernel(kernel, kernel.orientation, "convolve_same_vjp");
  require_same_shape(grid, upstream, "convolve_same_vjp");
  ConvolveVjp r{Grid(grid.height(), grid.width()), std::vector<double>(kernel.taps.size(), 0.0)};
  const Lines ln = lines_along(grid, kernel.orientation);
  const auto& t = kernel.taps;
  for (int l = 0; l < ln.count; ++l) {
    for (int k = 0; k < ln.length; ++k) {
      const double up = upstream[ln.index(l, k)];
      const std::size_t here = ln.index(l, k);
      const bool has_next = k + 1 < ln.length;
      if (t.size() == 2) {
        r.d_taps[0] += up * grid[here];
        r.d_grid[here] += t[0] * up;
        if (has_next) {
          r.d_taps[1] += up * grid[ln.index(l, k + 1)];
          r.d_grid[ln.index(l, k + 1)] += t[1] * up;
        }
      } else {
        if (has_next) {
          r.d_taps[0] += up * grid[ln.index(l, k + 1)];
          r.d_grid[ln.index(l, k + 1)] += t[0] * up;
        }
        r.d_taps[1] += up * grid[here];
        r.d_grid[here] += t[1] * up;
        if (k > 0) {
          r.d_taps[2] += up * grid[ln.index(l, k - 1)];
          r.d_grid[ln.index(l, k - 1)] += t[2] * up;
        }
      }
    }
  }
  return r;
}

GradientPair image_gradient(const Image& img, const Kernel1D& kx, const Kernel1D& ky) {
  check_kernel(kx, Orientation::horizontal, "image_gradient");
  check_kernel(ky, Orientation::vertical, "image_gradient");
  GradientPair g{convolve_same(img, kx), convolve_same(img, ky)};
  zero_position(g.px, Orientation::horizontal, 0);
  zero_position(g.px, Orientation::horizontal, img.width() - 1);
  zero_position(g.py, Orientation::vertical, 0);
  zero_position(g.py, Orientation::vertical, img.height() - 1);
  return g;
}

GradientOpVjp image_gradient_vjp(const Image& img, const Kernel1D& kx, const Kernel1D& ky,
                                 const GradientPair& upstream) {
  check_kernel(kx, Orientation::horizontal, "image_gradient_vjp");
  check_kernel(ky, Orientation::vertical, "image_gradient_vjp");
  Grid ux = upstream.px;
  Grid uy = upstream.py;
  zero_position(ux, Orientation::horizontal, 0);
  zero_position(ux, Orientation::horizontal, img.width() - 1);
  zero_position(uy, Orientation::vertical, 0);
  zero_position(uy, Orientation::vertical, img.height() - 1);
  ConvolveVjp cx = convolve_same_vjp(img, kx, ux);
  ConvolveVjp cy = convolve_same_vjp(img, ky, uy);
  for (std::size_t k = 0; k < cx.d_grid.size(); ++k) cx.d_grid[k] += cy.d_grid[k];
  return {std::move(cx.d_grid), {std::move(cx.d_taps), std::move(cy.d_taps)}};
}

GradientPair flow_gradient(const Grid& field, const Kernel1D& kx, const Kernel1D& ky) {
  check_kernel(kx, Orientation::horizontal, "flow_gradient");
  check_kernel(ky, Orientation::vertical, "flow_gradient");
  GradientPair g{convolve_same(field, kx), convolve_same(field, ky)};
  zero_position(g.px, Orientation::horizontal, field.width() - 1);
  zero_position(g.py, Orientation::vertical, field.height() - 1);
  return g;
}

GradientOpVjp flow_gradient_vjp(const Grid& field, const Kernel1D& kx, const Kernel1D& ky,
                                const GradientPair& upstream) {
  check_kernel(kx, Orientation::horizontal, "flow_gradient_vjp");
  check_kernel(ky, Orientation::vertical, "flow_gradient_vjp");
  Grid ux = upstream.px;
  Grid uy = upstream.py;
  zero_position(ux, Orientation::horizontal, field.width() - 1);
  zero_position(uy, Orientation::vertical, field.height() - 1);
  ConvolveVjp cx = convolve_same_vjp(field, kx, ux);
  ConvolveVjp cy = convolve_same_vjp(field, ky, uy);
  for (std::size_t k = 0; k < cx.d_grid.size(); ++k) cx.d_grid[k] += cy.d_grid[k];
  return {std::move(cx.d_grid), {std::move(cx.d_taps), std::move(cy.d_taps)}};
}

Grid divergence(const DualField& p, const Kernel1D& kx, const Kernel1D& ky) {
  require_same_shape(p.px, p.py, "divergence");
  check_grid(p.px, "divergence");
  check_kernel(kx, Orientation::horizontal, "divergence");
  check_kernel(ky, Orientation::vertical, "divergence");
  Grid out = divergence_part(p.px, kx);
  const Grid dy = divergence_part(p.py, ky);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += dy[k];
  return out;
}

DivergenceVjp divergence_vjp(const DualField& p, const Kernel1D& kx, const Kernel1D& ky,
                             const Grid& upstream) {
  require_same_shape(p.px, p.py, "divergence_vjp");
  require_same_shape(p.px, upstream, "divergence_vjp");
  check_kernel(kx, Orientation::horizontal, "divergence_vjp");
  check_kernel(ky, Orientation::vertical, "divergence_vjp");
  DivergenceVjp r{DualField(p.px.height(), p.px.width()), {}};
  divergence_part_vjp(p.px, kx, upstream, r.d_p.px, r.d_kernels.dx);
  divergence_part_vjp(p.py, ky, upstream, r.d_p.py, r.d_kernels.dy);
  return r;
}

namespace {

// Integer corner and fractional offset of a sample coordinate, or nothing
// when the hat kernel support misses the grid by more than one pixel.
struct SamplePos {
  int base;
  double frac;
};

bool far_outside(double s, int n) { return !(s > -2.0 && s < n + 1.0); }

SamplePos split(double s) {
  const double f = std::floor(s);
  return {static_cast<int>(f), s - f};
}

struct Neighbourhood {
  const Image& img;
  double sample(int x, int y) const {
    if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return 0.0;
    return img.at(x, y);
  }
};

void check_warp_inputs(const Image& img, const FlowField& flow, const char* what) {
  check_grid(img, what);
  require_same_shape(img, flow.u1, what);
  require_same_shape(img, flow.u2, what);
  if (!flow.all_finite()) throw std::invalid_argument(std::string(what) + ": non-finite flow");
}

}  // namespace

Image warp_bilinear(const Image& img, const FlowField& flow) {
  check_warp_inputs(img, flow, "warp_bilinear");
  const int w = img.width();
  const int h = img.height();
  Image out(h, w);
  const Neighbourhood nb{img};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = x + flow.u1.at(x, y);
      const double sy = y + flow.u2.at(x, y);
      if (far_outside(sx, w) || far_outside(sy, h)) continue;
      const auto [x0, fx] = split(sx);
      const auto [y0, fy] = split(sy);
      const double top = (1.0 - fx) * nb.sample(x0, y0) + fx * nb.sample(x0 + 1, y0);
      const double bottom = (1.0 - fx) * nb.sample(x0, y0 + 1) + fx * nb.sample(x0 + 1, y0 + 1);
      out.at(x, y) = (1.0 - fy) * top + fy * bottom;
    }
  }
  return out;
}

WarpVjp warp_bilinear_vjp(const Image& img, const FlowField& flow, const Grid& upstream) {
  check_warp_inputs(img, flow, "warp_bilinear_vjp");
  require_same_shape(img, upstream, "warp_bilinear_vjp");
  const int w = img.width();
  const int h = img.height();
  WarpVjp r{Grid(h, w), FlowField(h, w)};
  const Neighbourhood nb{img};
  auto scatter = [&](int x, int y, double v) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    r.d_img.at(x, y) += v;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double up = upstream.at(x, y);
      const double sx = x + flow.u1.at(x, y);
      const double sy = y + flow.u2.at(x, y);
      if (far_outside(sx, w) || far_outside(sy, h)) continue;
      const auto [x0, fx] = split(sx);
      const auto [y0, fy] = split(sy);
      scatter(x0, y0, up * (1.0 - fx) * (1.0 - fy));
      scatter(x0 + 1, y0, up * fx * (1.0 - fy));
      scatter(x0, y0 + 1, up * (1.0 - fx) * fy);
      scatter(x0 + 1, y0 + 1, up * fx * fy);

      // Slope along x of the interpolant on row n, blended over rows.
      auto slope_x = [&](int n) {
        const double right = nb.sample(x0 + 1, n) - nb.sample(x0, n);
        if (fx > 0.0) return right;
        return 0.5 * (right + nb.sample(x0, n) - nb.sample(x0 - 1, n));
      };
      auto slope_y = [&](int m) {
        const double down = nb.sample(m, y0 + 1) - nb.sample(m, y0);
        if (fy > 0.0) return down;
        return 0.5 * (down + nb.sample(m, y0) - nb.sample(m, y0 - 1));
      };
      const double dsx = (1.0 - fy) * slope_x(y0) + fy * slope_x(y0 + 1);
      const double dsy = (1.0 - fx) * slope_y(x0) + fx * slope_y(x0 + 1);
      r.d_flow.u1.at(x, y) = up * dsx;
      r.d_flow.u2.at(x, y) = up * dsy;
    }
  }
  return r;
}

}  // namespace tvnet
