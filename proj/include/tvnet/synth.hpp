#pragma once

#include <cstdint>
#include <string_view>

#include "tvnet/grid.hpp"

namespace tvnet {

enum class SynthKind {
  translate,       // band-limited random texture, uniform shift (magnitude, 0)
  rotate,          // same texture rotated about the centre; corner-radius shift ~ magnitude
  blob_translate,  // sum of Gaussian blobs, uniform shift (magnitude, 0)
};

SynthKind parse_synth_kind(std::string_view name);

struct SyntheticPair {
  Image I0;
  Image I1;
  FlowField gt;
};

/// Renders a synthetic frame pair with exact ground truth. Both frames are
/// point samples of one analytic brightness function f, I1(x) = f(x) and
/// I0(x) = f(x + gt(x)), so I1(x + gt(x)) = I0(x) holds exactly.
SyntheticPair synth_pair(SynthKind kind, int size, double magnitude, std::uint64_t seed);

}  // namespace tvnet
