#include "tvnet/params.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tvnet {
namespace {

std::vector<Kernel1D*> kernel_list(DifferenceKernels& k) {
  return {&k.image_x, &k.image_y, &k.flow_x, &k.flow_y, &k.div_x, &k.div_y};
}

}  // namespace

TVNetParams TVNetParams::constant(double u1, double u2) {
  TVNetParams p;
  p.u0_mode = InitMode::constant_vector;
  p.u0_constant = {u1, u2};
  return p;
}

TVNetParams TVNetParams::field(FlowField u0) {
  TVNetParams p;
  p.u0_mode = InitMode::full_field;
  p.u0_field = std::move(u0);
  return p;
}

FlowField TVNetParams::initial_flow(int height, int width) const {
  switch (u0_mode) {
    case InitMode::zero:
      return FlowField(height, width);
    case InitMode::constant_vector:
      return FlowField(Grid(height, width, u0_constant[0]), Grid(height, width, u0_constant[1]));
    case InitMode::full_field:
      if (u0_field.height() != height || u0_field.width() != width) {
        throw std::invalid_argument(
            "trainable u0 field is " + std::to_string(u0_field.height()) + "x" +
            std::to_string(u0_field.width()) + " but the coarsest level is " +
            std::to_string(height) + "x" + std::to_string(width));
      }
      return u0_field;
  }
  throw std::invalid_argument("unknown u0 mode");
}

std::size_t TVNetParams::u0_count() const {
  switch (u0_mode) {
    case InitMode::zero: return 0;
    case InitMode::constant_vector: return 2;
    case InitMode::full_field: return 2 * u0_field.size();
  }
  return 0;
}

std::vector<double> TVNetParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  if (u0_mode == InitMode::constant_vector) {
    flat.insert(flat.end(), u0_constant.begin(), u0_constant.end());
  } else if (u0_mode == InitMode::full_field) {
    flat.insert(flat.end(), u0_field.u1.data().begin(), u0_field.u1.data().end());
    flat.insert(flat.end(), u0_field.u2.data().begin(), u0_field.u2.data().end());
  }
  auto copy = kernels;
  for (const Kernel1D* k : kernel_list(copy)) flat.insert(flat.end(), k->taps.begin(), k->taps.end());
  return flat;
}

void TVNetParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("parameter vector has " + std::to_string(flat.size()) +
                                " values, expected " + std::to_string(parameter_count()));
  }
  std::size_t pos = 0;
  if (u0_mode == InitMode::constant_vector) {
    u0_constant = {flat[0], flat[1]};
    pos = 2;
  } else if (u0_mode == InitMode::full_field) {
    for (auto* g : {&u0_field.u1, &u0_field.u2}) {
      std::copy_n(flat.begin() + pos, g->size(), g->values().begin());
      pos += g->size();
    }
  }
  for (Kernel1D* k : kernel_list(kernels)) {
    std::copy_n(flat.begin() + pos, k->taps.size(), k->taps.begin());
    pos += k->taps.size();
  }
}

GradientSet GradientSet::zeros_like(const TVNetParams& params) {
  GradientSet g{params};
  std::vector<double> zeros(params.parameter_count(), 0.0);
  g.values.assign(zeros);
  return g;
}

bool GradientSet::all_finite() const {
  const auto flat = flatten();
  return std::all_of(flat.begin(), flat.end(), [](double v) { return std::isfinite(v); });
}

void GradientSet::accumulate(const GradientSet& other) {
  auto a = flatten();
  const auto b = other.flatten();
  if (a.size() != b.size()) throw std::invalid_argument("gradient sets differ in layout");
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  values.assign(a);
}

}  // namespace tvnet
