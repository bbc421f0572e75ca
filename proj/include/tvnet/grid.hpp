#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvnet {

/// Raised when a file does not match its declared binary or text layout.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Raised when an iterative computation produces a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major scalar grid. x runs along the width, y along the height.
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, double fill = 0.0);
  Grid(int height, int width, std::vector<double> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const Grid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  bool all_finite() const noexcept;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Brightness image, values nominally in [0,1].
using Image = Grid;

/// Per-pixel displacement in pixels: u1 horizontal, u2 vertical.
struct FlowField {
  Grid u1;
  Grid u2;

  FlowField() = default;
  FlowField(int height, int width) : u1(height, width), u2(height, width) {}
  FlowField(Grid u1_, Grid u2_);

  int height() const noexcept { return u1.height(); }
  int width() const noexcept { return u1.width(); }
  std::size_t size() const noexcept { return u1.size(); }
  bool same_shape(const Grid& g) const noexcept { return u1.same_shape(g); }
  bool same_shape(const FlowField& f) const noexcept { return u1.same_shape(f.u1); }
  bool all_finite() const noexcept { return u1.all_finite() && u2.all_finite(); }

  friend bool operator==(const FlowField&, const FlowField&) = default;
};

/// Dual vector field of one flow component: (x part, y part).
struct DualField {
  Grid px;
  Grid py;

  DualField() = default;
  DualField(int height, int width) : px(height, width), py(height, width) {}
  DualField(Grid px_, Grid py_) : px(std::move(px_)), py(std::move(py_)) {}

  friend bool operator==(const DualField&, const DualField&) = default;
};

/// Pair of partial derivative grids (d/dx, d/dy).
using GradientPair = DualField;

void require_same_shape(const Grid& a, const Grid& b, const char* what);

}  // namespace tvnet
