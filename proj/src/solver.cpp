#include "tvnet/solver.hpp"

#include <cmath>
#include <string>

#include "tvnet/pyramid.hpp"

namespace tvnet {

void SolverConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(std::isfinite(v) && v > 0.0)) {
      throw std::invalid_argument(std::string(name) + " must be positive and finite");
    }
  };
  positive(lambda, "lambda");
  positive(theta, "theta");
  positive(tau, "tau");
  positive(eps_div, "eps_div");
  if (!(std::isfinite(eps_stop) && eps_stop >= 0.0)) {
    throw std::invalid_argument("eps_stop must be non-negative and finite");
  }
  if (n_scales < 1 || n_warps < 1 || n_iters < 1) {
    throw std::invalid_argument("n_scales, n_warps and n_iters must be positive");
  }
  if (!(scale_factor > 0.0 && scale_factor < 1.0)) {
    throw std::invalid_argument("scale_factor must lie in (0,1)");
  }
}

SolverConfig SolverConfig::with_shape(int scales, int warps, int iters) const {
  SolverConfig c = *this;
  c.n_scales = scales;
  c.n_warps = warps;
  c.n_iters = iters;
  return c;
}

SolverState SolverState::start(FlowField u0) {
  const int h = u0.height();
  const int w = u0.width();
  return {std::move(u0), DualField(h, w), DualField(h, w)};
}

VPixel v_update_pixel(double u1, double u2, double rho, double gx, double gy, double lt,
                      double eps) {
  const double g2 = gx * gx + gy * gy;
  const double bound = lt * g2;
  if (rho < -bound) return {u1 + lt * gx, u2 + lt * gy, VCase::step_up};
  if (rho > bound) return {u1 - lt * gx, u2 - lt * gy, VCase::step_down};
  const double scale = rho / (g2 + eps);
  return {u1 - scale * gx, u2 - scale * gy, VCase::project};
}

TaylorLinearization linearize(const Image& I0, const Image& I1, const FlowField& u0,
                              const DifferenceKernels& kernels) {
  require_same_shape(I0, I1, "linearize");
  return linearize(I0, I1, image_gradient(I1, kernels.image_x, kernels.image_y), u0);
}

TaylorLinearization linearize(const Image& I0, const Image& I1, const GradientPair& grad_I1,
                              const FlowField& u0) {
  require_same_shape(I0, I1, "linearize");
  require_same_shape(I0, u0.u1, "linearize");
  require_same_shape(I0, grad_I1.px, "linearize");
  TaylorLinearization lin{warp_bilinear(I1, u0),
                          {warp_bilinear(grad_I1.px, u0), warp_bilinear(grad_I1.py, u0)},
                          Grid(I0.height(), I0.width())};
  for (std::size_t k = 0; k < I0.size(); ++k) {
    lin.rho_const[k] = lin.I1_warped[k] - I0[k] - lin.grad_warped.px[k] * u0.u1[k] -
                       lin.grad_warped.py[k] * u0.u2[k];
  }
  return lin;
}

Grid residual(const FlowField& u, const TaylorLinearization& lin) {
  require_same_shape(u.u1, lin.rho_const, "residual");
  Grid rho(u.height(), u.width());
  for (std::size_t k = 0; k < rho.size(); ++k) {
    rho[k] = lin.rho_const[k] + lin.grad_warped.px[k] * u.u1[k] + lin.grad_warped.py[k] * u.u2[k];
  }
  return rho;
}

FlowField v_update(const FlowField& u, const TaylorLinearization& lin, double lambda,
                   double theta, double eps_div, std::vector<VCase>* branches) {
  const Grid rho = residual(u, lin);
  const double lt = lambda * theta;
  FlowField v(u.height(), u.width());
  if (branches) branches->resize(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const VPixel px = v_update_pixel(u.u1[k], u.u2[k], rho[k], lin.grad_warped.px[k],
                                     lin.grad_warped.py[k], lt, eps_div);
    v.u1[k] = px.v1;
    v.u2[k] = px.v2;
    if (branches) (*branches)[k] = px.branch;
  }
  return v;
}

FlowField u_update(const FlowField& v, const DualField& p1, const DualField& p2, double theta,
                   const DifferenceKernels& kernels) {
  require_same_shape(v.u1, p1.px, "u_update");
  require_same_shape(v.u1, p2.px, "u_update");
  const Grid div1 = divergence(p1, kernels.div_x, kernels.div_y);
  const Grid div2 = divergence(p2, kernels.div_x, kernels.div_y);
  FlowField u(v.height(), v.width());
  for (std::size_t k = 0; k < v.size(); ++k) {
    u.u1[k] = v.u1[k] + theta * div1[k];
    u.u2[k] = v.u2[k] + theta * div2[k];
  }
  return u;
}

DualField p_update(const DualField& p, const GradientPair& grad_u, double tau, double theta,
                   double eps_div) {
  require_same_shape(p.px, grad_u.px, "p_update");
  require_same_shape(p.py, grad_u.py, "p_update");
  const double step = tau / theta;
  DualField out(p.px.height(), p.px.width());
  for (std::size_t k = 0; k < p.px.size(); ++k) {
    const double gx = grad_u.px[k];
    const double gy = grad_u.py[k];
    const double denom = 1.0 + step * std::sqrt(gx * gx + gy * gy + eps_div);
    out.px[k] = (p.px[k] + step * gx) / denom;
    out.py[k] = (p.py[k] + step * gy) / denom;
  }
  return out;
}

double stopping_measure(const FlowField& u_new, const FlowField& u_old) {
  double acc = 0.0;
  for (std::size_t k = 0; k < u_new.size(); ++k) {
    const double d1 = u_new.u1[k] - u_old.u1[k];
    const double d2 = u_new.u2[k] - u_old.u2[k];
    acc += d1 * d1 + d2 * d2;
  }
  return acc / static_cast<double>(u_new.size());
}

SolverState inner_iterations(SolverState state, const TaylorLinearization& lin,
                             const SolverConfig& cfg, const DifferenceKernels& kernels,
                             SolverObserver* observer) {
  std::vector<VCase> branches;
  for (int n = 0; n < cfg.n_iters; ++n) {
    const FlowField v =
        v_update(state.u, lin, cfg.lambda, cfg.theta, cfg.eps_div, observer ? &branches : nullptr);
    SolverState next;
    next.u = u_update(v, state.p1, state.p2, cfg.theta, kernels);
    next.p1 = p_update(state.p1, flow_gradient(next.u.u1, kernels.flow_x, kernels.flow_y),
                       cfg.tau, cfg.theta, cfg.eps_div);
    next.p2 = p_update(state.p2, flow_gradient(next.u.u2, kernels.flow_x, kernels.flow_y),
                       cfg.tau, cfg.theta, cfg.eps_div);
    if (observer) observer->on_iteration(state, branches, next);
    const bool converged =
        cfg.eps_stop > 0.0 && stopping_measure(next.u, state.u) <= cfg.eps_stop * cfg.eps_stop;
    state = std::move(next);
    if (converged) break;
  }
  return state;
}

namespace {

FlowField warp_loop(const Image& I0, const Image& I1, const GradientPair& grad_I1, FlowField u0,
                    const SolverConfig& cfg, const DifferenceKernels& kernels,
                    SolverObserver* observer) {
  SolverState state = SolverState::start(std::move(u0));
  for (int w = 0; w < cfg.n_warps; ++w) {
    const TaylorLinearization lin = linearize(I0, I1, grad_I1, state.u);
    if (observer) observer->on_warp_begin(state.u, lin);
    state = inner_iterations(std::move(state), lin, cfg, kernels, observer);
  }
  return std::move(state.u);
}

}  // namespace

FlowField solve_single_scale(const Image& I0, const Image& I1, const FlowField& u0,
                             const SolverConfig& cfg, const DifferenceKernels& kernels,
                             SolverObserver* observer) {
  cfg.validate();
  require_same_shape(I0, I1, "solve_single_scale");
  require_same_shape(I0, u0.u1, "solve_single_scale");
  const GradientPair grad = image_gradient(I1, kernels.image_x, kernels.image_y);
  if (observer) observer->on_scale_begin(0, I0, I1, grad, u0);
  FlowField u = warp_loop(I0, I1, grad, u0, cfg, kernels, observer);
  if (observer) observer->on_scale_end(u);
  return u;
}

FlowField solve_multiscale(const Image& I0, const Image& I1, const SolverConfig& cfg,
                           const TVNetParams& params, SolverObserver* observer) {
  cfg.validate();
  require_same_shape(I0, I1, "solve_multiscale");
  const auto steps = build_pyramid(I0.height(), I0.width(), cfg.n_scales, cfg.scale_factor);

  std::vector<Image> pyr0{I0};
  std::vector<Image> pyr1{I1};
  for (const Resampler& r : steps) {
    pyr0.push_back(r.apply(pyr0.back()));
    pyr1.push_back(r.apply(pyr1.back()));
  }

  const int coarsest = cfg.n_scales - 1;
  FlowField u = params.initial_flow(pyr0[coarsest].height(), pyr0[coarsest].width());
  const double magnify = 1.0 / cfg.scale_factor;
  for (int level = coarsest; level >= 0; --level) {
    const Image& a = pyr0[level];
    const Image& b = pyr1[level];
    if (level != coarsest) {
      const auto up = Resampler::bilinear_upsample(u.height(), u.width(), a.height(), a.width(),
                                                   cfg.scale_factor);
      FlowField fine(up.apply(u.u1), up.apply(u.u2));
      for (std::size_t k = 0; k < fine.size(); ++k) {
        fine.u1[k] *= magnify;
        fine.u2[k] *= magnify;
      }
      u = std::move(fine);
    }
    const GradientPair grad = image_gradient(b, params.kernels.image_x, params.kernels.image_y);
    if (observer) observer->on_scale_begin(level, a, b, grad, u);
    u = warp_loop(a, b, grad, std::move(u), cfg, params.kernels, observer);
    if (observer) observer->on_scale_end(u);
  }
  return u;
}

double relaxed_energy(const FlowField& u, const FlowField& v, const TaylorLinearization& lin,
                      double lambda, double theta, const DifferenceKernels& kernels) {
  require_same_shape(u.u1, v.u1, "relaxed_energy");
  const GradientPair g1 = flow_gradient(u.u1, kernels.flow_x, kernels.flow_y);
  const GradientPair g2 = flow_gradient(u.u2, kernels.flow_x, kernels.flow_y);
  const Grid rho = residual(v, lin);
  double total = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double tv = std::hypot(g1.px[k], g1.py[k]) + std::hypot(g2.px[k], g2.py[k]);
    const double d1 = u.u1[k] - v.u1[k];
    const double d2 = u.u2[k] - v.u2[k];
    total += tv + (d1 * d1 + d2 * d2) / (2.0 * theta) + lambda * std::abs(rho[k]);
  }
  return total;
}

}  // namespace tvnet
