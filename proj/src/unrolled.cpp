#include "tvnet/unrolled.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tvnet {

class TapeRecorder final : public SolverObserver {
 public:
  TapeRecorder(Tape& tape, const Image& I0, const TVNetParams& params, const SolverConfig& cfg)
      : tape_(tape) {
    tape_.config_ = cfg;
    tape_.params_ = params;
    tape_.height_ = I0.height();
    tape_.width_ = I0.width();
    tape_.pyramid_ = build_pyramid(I0.height(), I0.width(), cfg.n_scales, cfg.scale_factor);
  }

  void on_scale_begin(int level, const Image&, const Image& I1, const GradientPair& grad_I1,
                      const FlowField& u_init) override {
    tape_.scales_.push_back({level, I1, grad_I1, u_init, {}});
  }
  void on_warp_begin(const FlowField& u_start, const TaylorLinearization& lin) override {
    tape_.scales_.back().warps.push_back({u_start, lin, {}});
  }
  void on_iteration(const SolverState& before, const std::vector<VCase>& branches,
                    const SolverState&) override {
    tape_.scales_.back().warps.back().iterations.push_back({before, branches});
  }

 private:
  Tape& tape_;
};

std::size_t Tape::layer_count() const {
  std::size_t n = 0;
  for (const Scale& s : scales_) {
    for (const Warp& w : s.warps) n += w.iterations.size();
  }
  return n;
}

std::size_t Tape::linearization_count() const {
  std::size_t n = 0;
  for (const Scale& s : scales_) n += s.warps.size();
  return n;
}

std::size_t Tape::byte_size() const {
  std::size_t bytes = 0;
  for (const Scale& s : scales_) {
    const std::size_t px = s.I1.size();
    bytes += 5 * px * sizeof(double);
    for (const Warp& w : s.warps) {
      bytes += 6 * px * sizeof(double);
      bytes += w.iterations.size() * (6 * px * sizeof(double) + px * sizeof(VCase));
    }
  }
  return bytes;
}

ForwardResult forward(const Image& I0, const Image& I1, const TVNetParams& params,
                      const SolverConfig& cfg) {
  SolverConfig fixed = cfg;
  fixed.eps_stop = 0.0;
  fixed.validate();
  ForwardResult out;
  TapeRecorder recorder(out.tape, I0, params, fixed);
  out.flow = solve_multiscale(I0, I1, fixed, params, &recorder);
  return out;
}

namespace {

void add_into(std::vector<double>& acc, const std::vector<double>& v, double scale = 1.0) {
  for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += scale * v[k];
}

void add_into(Grid& acc, const Grid& v) {
  for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += v[k];
}

void add_into(FlowField& acc, const FlowField& v) {
  add_into(acc.u1, v.u1);
  add_into(acc.u2, v.u2);
}

// Reverse of p <- (p + r g) / (1 + r sqrt(|g|^2 + eps)). Returns the adjoint of
// the incoming dual and writes the adjoint of g.
DualField p_update_vjp(const DualField& p_in, const GradientPair& g, const DualField& p_bar,
                       double r, double eps, GradientPair& g_bar) {
  DualField in_bar(p_in.px.height(), p_in.px.width());
  for (std::size_t k = 0; k < p_in.px.size(); ++k) {
    const double gx = g.px[k];
    const double gy = g.py[k];
    const double s = std::sqrt(gx * gx + gy * gy + eps);
    const double d = 1.0 + r * s;
    const double nx = p_in.px[k] + r * gx;
    const double ny = p_in.py[k] + r * gy;
    const double bx = p_bar.px[k];
    const double by = p_bar.py[k];
    in_bar.px[k] = bx / d;
    in_bar.py[k] = by / d;
    const double coeff = (bx * nx + by * ny) / (d * d) * r / s;
    g_bar.px[k] = r * bx / d - coeff * gx;
    g_bar.py[k] = r * by / d - coeff * gy;
  }
  return in_bar;
}

struct IterationAdjoint {
  FlowField& u_bar;
  DualField& p1_bar;
  DualField& p2_bar;
  GradientPair& gw_bar;  // adjoint of the warped image gradient
  Grid& rho_c_bar;
  DifferenceKernels& kernel_bar;
};

void iteration_vjp(const Tape::Iteration& it, const TaylorLinearization& lin,
                   const SolverConfig& cfg, const DifferenceKernels& k, IterationAdjoint& adj) {
  const SolverState& st = it.before;
  const int h = st.u.height();
  const int w = st.u.width();
  const FlowField v = v_update(st.u, lin, cfg.lambda, cfg.theta, cfg.eps_div);
  const FlowField u_new = u_update(v, st.p1, st.p2, cfg.theta, k);
  const double r = cfg.tau / cfg.theta;

  for (int d = 0; d < 2; ++d) {
    const Grid& comp = d == 0 ? u_new.u1 : u_new.u2;
    const DualField& p_in = d == 0 ? st.p1 : st.p2;
    DualField& p_bar = d == 0 ? adj.p1_bar : adj.p2_bar;
    Grid& u_bar = d == 0 ? adj.u_bar.u1 : adj.u_bar.u2;

    const GradientPair g = flow_gradient(comp, k.flow_x, k.flow_y);
    GradientPair g_bar(h, w);
    DualField p_in_bar = p_update_vjp(p_in, g, p_bar, r, cfg.eps_div, g_bar);

    const GradientOpVjp fg = flow_gradient_vjp(comp, k.flow_x, k.flow_y, g_bar);
    add_into(adj.kernel_bar.flow_x.taps, fg.d_kernels.dx);
    add_into(adj.kernel_bar.flow_y.taps, fg.d_kernels.dy);
    add_into(u_bar, fg.d_input);

    // u_new = v + theta * div(p_in)
    Grid scaled = u_bar;
    for (auto& x : scaled.values()) x *= cfg.theta;
    const DivergenceVjp dv = divergence_vjp(p_in, k.div_x, k.div_y, scaled);
    add_into(adj.kernel_bar.div_x.taps, dv.d_kernels.dx);
    add_into(adj.kernel_bar.div_y.taps, dv.d_kernels.dy);
    add_into(p_in_bar.px, dv.d_p.px);
    add_into(p_in_bar.py, dv.d_p.py);
    p_bar = std::move(p_in_bar);
  }

  // adj.u_bar now holds the adjoint of v; push it through the thresholding step.
  const Grid rho = residual(st.u, lin);
  const double lt = cfg.lambda * cfg.theta;
  for (std::size_t px = 0; px < rho.size(); ++px) {
    const double vb1 = adj.u_bar.u1[px];
    const double vb2 = adj.u_bar.u2[px];
    const double gx = lin.grad_warped.px[px];
    const double gy = lin.grad_warped.py[px];
    switch (it.branches[px]) {
      case VCase::step_up:
        adj.gw_bar.px[px] += lt * vb1;
        adj.gw_bar.py[px] += lt * vb2;
        break;
      case VCase::step_down:
        adj.gw_bar.px[px] -= lt * vb1;
        adj.gw_bar.py[px] -= lt * vb2;
        break;
      case VCase::project: {
        const double q = gx * gx + gy * gy + cfg.eps_div;
        const double dot = vb1 * gx + vb2 * gy;
        const double rho_bar = -dot / q;
        const double curv = 2.0 * rho[px] * dot / (q * q);
        adj.gw_bar.px[px] += -rho[px] * vb1 / q + curv * gx + rho_bar * st.u.u1[px];
        adj.gw_bar.py[px] += -rho[px] * vb2 / q + curv * gy + rho_bar * st.u.u2[px];
        adj.u_bar.u1[px] = vb1 + rho_bar * gx;
        adj.u_bar.u2[px] = vb2 + rho_bar * gy;
        adj.rho_c_bar[px] += rho_bar;
        break;
      }
    }
  }
}

}  // namespace

BackwardResult backward(const Tape& tape, const FlowField& d_flow) {
  const auto& scales = tape.scales();
  if (scales.empty()) throw std::invalid_argument("backward: empty tape");
  if (d_flow.height() != tape.height() || d_flow.width() != tape.width() ||
      !d_flow.u1.same_shape(d_flow.u2)) {
    throw std::invalid_argument("backward: seed shape does not match the tape");
  }
  const SolverConfig& cfg = tape.config();
  const DifferenceKernels& k = tape.params().kernels;

  BackwardResult out{GradientSet::zeros_like(tape.params()), Grid(), Grid()};
  DifferenceKernels& kbar = out.grads.values.kernels;
  std::vector<Grid> dI0(scales.size());
  std::vector<Grid> dI1(scales.size());

  FlowField u_bar = d_flow;
  for (std::size_t si = scales.size(); si-- > 0;) {
    const Tape::Scale& sc = scales[si];
    const int h = sc.I1.height();
    const int w = sc.I1.width();
    DualField p1_bar(h, w);
    DualField p2_bar(h, w);
    GradientPair grad_I1_bar(h, w);
    Grid i0_bar(h, w);
    Grid i1_bar(h, w);

    for (auto wr = sc.warps.rbegin(); wr != sc.warps.rend(); ++wr) {
      const TaylorLinearization& lin = wr->lin;
      GradientPair gw_bar(h, w);
      Grid rho_c_bar(h, w);
      IterationAdjoint adj{u_bar, p1_bar, p2_bar, gw_bar, rho_c_bar, kbar};
      for (auto it = wr->iterations.rbegin(); it != wr->iterations.rend(); ++it) {
        iteration_vjp(*it, lin, cfg, k, adj);
      }

      // rho_const = I1w - I0 - gxw*u1 - gyw*u2, all evaluated at u_start.
      const FlowField& us = wr->u_start;
      Grid i1w_bar(h, w);
      for (std::size_t px = 0; px < rho_c_bar.size(); ++px) {
        const double rb = rho_c_bar[px];
        i1w_bar[px] = rb;
        i0_bar[px] -= rb;
        gw_bar.px[px] -= rb * us.u1[px];
        gw_bar.py[px] -= rb * us.u2[px];
        u_bar.u1[px] -= rb * lin.grad_warped.px[px];
        u_bar.u2[px] -= rb * lin.grad_warped.py[px];
      }
      const WarpVjp wi = warp_bilinear_vjp(sc.I1, us, i1w_bar);
      const WarpVjp wx = warp_bilinear_vjp(sc.grad_I1.px, us, gw_bar.px);
      const WarpVjp wy = warp_bilinear_vjp(sc.grad_I1.py, us, gw_bar.py);
      add_into(i1_bar, wi.d_img);
      add_into(grad_I1_bar.px, wx.d_img);
      add_into(grad_I1_bar.py, wy.d_img);
      add_into(u_bar, wi.d_flow);
      add_into(u_bar, wx.d_flow);
      add_into(u_bar, wy.d_flow);
    }

    const GradientOpVjp ig = image_gradient_vjp(sc.I1, k.image_x, k.image_y, grad_I1_bar);
    add_into(i1_bar, ig.d_input);
    add_into(kbar.image_x.taps, ig.d_kernels.dx);
    add_into(kbar.image_y.taps, ig.d_kernels.dy);
    dI0[sc.level] = std::move(i0_bar);
    dI1[sc.level] = std::move(i1_bar);

    if (si == 0) {
      TVNetParams& g = out.grads.values;
      if (g.u0_mode == InitMode::constant_vector) {
        g.u0_constant = {std::accumulate(u_bar.u1.data().begin(), u_bar.u1.data().end(), 0.0),
                         std::accumulate(u_bar.u2.data().begin(), u_bar.u2.data().end(), 0.0)};
      } else if (g.u0_mode == InitMode::full_field) {
        g.u0_field = u_bar;
      }
    } else {
      const Tape::Scale& coarse = scales[si - 1];
      const auto up = Resampler::bilinear_upsample(coarse.I1.height(), coarse.I1.width(), h, w,
                                                   cfg.scale_factor);
      const double magnify = 1.0 / cfg.scale_factor;
      for (auto* comp : {&u_bar.u1, &u_bar.u2}) {
        for (auto& x : comp->values()) x *= magnify;
      }
      u_bar = FlowField(up.apply_adjoint(u_bar.u1), up.apply_adjoint(u_bar.u2));
    }
  }

  const auto& pyr = tape.pyramid();
  for (std::size_t level = pyr.size(); level > 0; --level) {
    add_into(dI0[level - 1], pyr[level - 1].apply_adjoint(dI0[level]));
    add_into(dI1[level - 1], pyr[level - 1].apply_adjoint(dI1[level]));
  }
  out.d_I0 = std::move(dI0[0]);
  out.d_I1 = std::move(dI1[0]);
  return out;
}

GradCheckReport grad_check(const Image& I0, const Image& I1, const TVNetParams& params,
                           const SolverConfig& cfg, const LossFunction& loss, int n_probes,
                           double step, std::uint64_t seed) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  SolverConfig fixed = cfg;
  fixed.eps_stop = 0.0;

  const ForwardResult fw = forward(I0, I1, params, fixed);
  const LossValue base = loss(fw.flow);
  const std::vector<double> analytic = backward(fw.tape, base.seed).grads.flatten();

  std::vector<std::size_t> order(analytic.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 engine(seed);
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(std::max(n_probes, 0)),
                                                  order.size());
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t pick = k + static_cast<std::size_t>(engine() % (order.size() - k));
    std::swap(order[k], order[pick]);
  }

  const std::vector<double> flat = params.flatten();
  auto loss_at = [&](std::size_t index, double value) {
    std::vector<double> shifted = flat;
    shifted[index] = value;
    TVNetParams p = params;
    p.assign(shifted);
    return loss(solve_multiscale(I0, I1, fixed, p)).value;
  };

  GradCheckReport report;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t idx = order[k];
    const double hi = flat[idx] + step;
    const double lo = flat[idx] - step;
    const double numeric = (loss_at(idx, hi) - loss_at(idx, lo)) / (hi - lo);
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
    const double rel = std::abs(a - numeric) / denom;
    report.probes.push_back({idx, a, numeric, rel});
    report.max_relative_error = std::max(report.max_relative_error, rel);
  }
  return report;
}

}  // namespace tvnet
