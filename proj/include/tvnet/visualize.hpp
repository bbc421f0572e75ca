#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "tvnet/grid.hpp"
#include "tvnet/io.hpp"

namespace tvnet {

using Rgb = std::array<std::uint8_t, 3>;

/// Colour of one flow vector on the 55-entry optical-flow colour wheel.
/// Hue follows atan2(u2, u1) with angle 0 at the wheel's first entry (red);
/// saturation grows with |u| / max_magnitude and saturates at 1. Vectors
/// longer than max_magnitude are darkened to 75%.
Rgb flow_vector_color(double u1, double u2, double max_magnitude);

/// Renders a flow field. Without max_magnitude the 99th percentile of the
/// vector lengths is used; zero flow renders white.
ColorImage flow_to_color(const FlowField& flow, std::optional<double> max_magnitude = {});

/// Nearest-rank 99th percentile of the vector lengths.
double magnitude_percentile99(const FlowField& flow);

}  // namespace tvnet
