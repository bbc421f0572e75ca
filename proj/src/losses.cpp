#include "tvnet/losses.hpp"

#include <algorithm>
#include <cmath>

namespace tvnet {
namespace {
constexpr double kSmoothing = 1e-12;
constexpr double kEpeFloor = 1e-12;
}  // namespace

Grid validity_mask(const FlowField& gt) {
  Grid mask(gt.height(), gt.width());
  for (std::size_t k = 0; k < mask.size(); ++k) {
    const double a = gt.u1[k];
    const double b = gt.u2[k];
    const bool known = std::isfinite(a) && std::isfinite(b) &&
                       std::abs(a) <= kUnknownFlowThreshold && std::abs(b) <= kUnknownFlowThreshold;
    mask[k] = known ? 1.0 : 0.0;
  }
  return mask;
}

LossValue epe(const FlowField& pred, const FlowField& gt, const Grid* mask) {
  require_same_shape(pred.u1, gt.u1, "epe");
  if (mask) require_same_shape(pred.u1, *mask, "epe mask");
  std::size_t valid = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (!mask || (*mask)[k] != 0.0) ++valid;
  }
  if (valid == 0) throw std::invalid_argument("epe: no valid pixels");

  const double inv_n = 1.0 / static_cast<double>(valid);
  LossValue out{0.0, FlowField(pred.height(), pred.width())};
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (mask && (*mask)[k] == 0.0) continue;
    const double d1 = pred.u1[k] - gt.u1[k];
    const double d2 = pred.u2[k] - gt.u2[k];
    const double norm = std::sqrt(d1 * d1 + d2 * d2);
    sum += norm;
    const double denom = std::max(norm, kEpeFloor);
    out.seed.u1[k] = d1 / denom * inv_n;
    out.seed.u2[k] = d2 / denom * inv_n;
  }
  out.value = sum * inv_n;
  return out;
}

LossValue flow_energy(const Image& I0, const Image& I1, const FlowField& flow, double lambda,
                      const DifferenceKernels& kernels) {
  require_same_shape(I0, I1, "flow_energy");
  require_same_shape(I0, flow.u1, "flow_energy");
  const Image warped = warp_bilinear(I1, flow);
  LossValue out{0.0, FlowField(flow.height(), flow.width())};
  Grid d_rho(flow.height(), flow.width());

  double total = 0.0;
  for (int d = 0; d < 2; ++d) {
    const Grid& comp = d == 0 ? flow.u1 : flow.u2;
    const GradientPair g = flow_gradient(comp, kernels.flow_x, kernels.flow_y);
    GradientPair dg(flow.height(), flow.width());
    for (std::size_t k = 0; k < comp.size(); ++k) {
      const double mag = std::sqrt(g.px[k] * g.px[k] + g.py[k] * g.py[k] + kSmoothing);
      total += mag;
      dg.px[k] = g.px[k] / mag;
      dg.py[k] = g.py[k] / mag;
    }
    const GradientOpVjp back = flow_gradient_vjp(comp, kernels.flow_x, kernels.flow_y, dg);
    Grid& seed = d == 0 ? out.seed.u1 : out.seed.u2;
    for (std::size_t k = 0; k < comp.size(); ++k) seed[k] += back.d_input[k];
  }
  for (std::size_t k = 0; k < warped.size(); ++k) {
    const double rho = warped[k] - I0[k];
    const double mag = std::sqrt(rho * rho + kSmoothing);
    total += lambda * mag;
    d_rho[k] = lambda * rho / mag;
  }
  const WarpVjp wb = warp_bilinear_vjp(I1, flow, d_rho);
  for (std::size_t k = 0; k < flow.size(); ++k) {
    out.seed.u1[k] += wb.d_flow.u1[k];
    out.seed.u2[k] += wb.d_flow.u2[k];
  }
  out.value = total;
  return out;
}

LossValue multitask_combine(const LossValue& task, const LossValue& flow, double lambda_mix) {
  require_same_shape(task.seed.u1, flow.seed.u1, "multitask_combine");
  LossValue out{task.value + lambda_mix * flow.value, task.seed};
  for (std::size_t k = 0; k < out.seed.size(); ++k) {
    out.seed.u1[k] += lambda_mix * flow.seed.u1[k];
    out.seed.u2[k] += lambda_mix * flow.seed.u2[k];
  }
  return out;
}

}  // namespace tvnet
