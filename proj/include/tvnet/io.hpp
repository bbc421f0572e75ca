#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tvnet/grid.hpp"
#include "tvnet/params.hpp"
#include "tvnet/solver.hpp"

namespace tvnet {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// --- Middlebury .flo ------------------------------------------------------
//
// "PIEH" magic, int32 width, int32 height (little endian), then width*height
// interleaved (u1, u2) float32 pairs, row-major.

Bytes encode_flo(const FlowField& flow);
FlowField decode_flo(std::span<const std::uint8_t> bytes);
FlowField read_flo(const std::filesystem::path& path);
void write_flo(const std::filesystem::path& path, const FlowField& flow);

// --- Binary PNM -----------------------------------------------------------

/// Decodes P5 or P6 with maxval up to 65535. Colour is reduced to luma
/// 0.299 R + 0.587 G + 0.114 B; brightness is scaled to [0,1].
Image decode_pnm(std::span<const std::uint8_t> bytes);
Image read_image(const std::filesystem::path& path);

/// P5 with maxval 65535; values are clamped to [0,1] and rounded.
Bytes encode_pgm(const Image& img);
void write_image(const std::filesystem::path& path, const Image& img);

struct ColorImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  // row-major RGB triplets

  friend bool operator==(const ColorImage&, const ColorImage&) = default;
};

Bytes encode_ppm(const ColorImage& img);
void write_color_image(const std::filesystem::path& path, const ColorImage& img);

// --- Parameter files ------------------------------------------------------
//
// 8-byte tag "TVNETPRM", uint32 version, then uint64-length-prefixed float64
// arrays: u0 shape [mode, height, width], u0 values, then the taps of
// image_x, image_y, flow_x, flow_y, div_x, div_y.

inline constexpr std::uint32_t kParamsVersion = 1;

Bytes encode_params(const TVNetParams& params);
TVNetParams decode_params(std::span<const std::uint8_t> bytes);
TVNetParams read_params(const std::filesystem::path& path);
void write_params(const std::filesystem::path& path, const TVNetParams& params);

// --- Solver configuration files ---------------------------------------------
//
// Flat "key = value" lines, '#' starts a comment. Keys are the SolverConfig
// field names; unknown keys are rejected.

SolverConfig parse_config(const std::string& text, SolverConfig base = {});
SolverConfig read_config(const std::filesystem::path& path, SolverConfig base = {});

/// Applies one key/value to cfg; throws std::invalid_argument for unknown keys
/// or unparsable values.
void set_config_value(SolverConfig& cfg, const std::string& key, const std::string& value);

// --- Pair lists -------------------------------------------------------------

struct PairEntry {
  std::filesystem::path image0;
  std::filesystem::path image1;
  std::filesystem::path flow;  // empty when no ground truth is listed
  std::string name;
};

/// Whitespace-separated "img0 img1 [gt.flo]" per line; relative paths are
/// resolved against the list file's directory.
std::vector<PairEntry> read_pair_list(const std::filesystem::path& path);

}  // namespace tvnet
