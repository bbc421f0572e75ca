#include "tvnet/grid.hpp"

#include <algorithm>
#include <cmath>

namespace tvnet {

Grid::Grid(int height, int width, double fill) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("grid dimensions must be positive, got " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
  data_.assign(static_cast<std::size_t>(height) * width, fill);
}

Grid::Grid(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("grid dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("grid data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(height) + "x" +
                                std::to_string(width));
  }
}

bool Grid::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

FlowField::FlowField(Grid u1_, Grid u2_) : u1(std::move(u1_)), u2(std::move(u2_)) {
  require_same_shape(u1, u2, "flow components");
}

void require_same_shape(const Grid& a, const Grid& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                                " vs " + std::to_string(b.height()) + "x" +
                                std::to_string(b.width()));
  }
}

}  // namespace tvnet
