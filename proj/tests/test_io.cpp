#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "support.hpp"
#include "tvnet/io.hpp"
#include "tvnet/manifest.hpp"
#include "tvnet/synth.hpp"
#include "tvnet/visualize.hpp"

using namespace tvnet;
using namespace tvnet::testing;

namespace {

FlowField random_float_flow(int h, int w, std::mt19937_64& rng) {
  FlowField f = random_flow(h, w, rng, 20.0);
  for (auto* g : {&f.u1, &f.u2})
    for (auto& v : g->values()) v = static_cast<float>(v);
  return f;
}

Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

template <std::size_t N>
Bytes raw(const char (&s)[N]) {
  return Bytes(s, s + N - 1);
}

template <typename Fn>
std::size_t format_error_offset(Fn fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.offset();
  }
  FAIL("expected a FormatError");
  return 0;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("flo: 1x1 zero flow is a 20-byte file") {
  const Bytes b = encode_flo(FlowField(1, 1));
  const Bytes expected{'P', 'I', 'E', 'H', 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK(b == expected);
  float tag;
  std::memcpy(&tag, b.data(), 4);
  CHECK(tag == 202021.25f);
}

TEST_CASE("flo: header layout is width then height") {
  const Bytes b = encode_flo(FlowField(3, 5));
  CHECK(b.size() == 12 + 8 * 15);
  CHECK(b[4] == 5);
  CHECK(b[8] == 3);
  const FlowField back = decode_flo(b);
  CHECK(back.height() == 3);
  CHECK(back.width() == 5);
}

TEST_CASE("flo: round trips are bit-exact") {
  std::mt19937_64 rng(1);
  const FlowField f = random_float_flow(5, 4, rng);
  CHECK(decode_flo(encode_flo(f)) == f);
  const Bytes b = encode_flo(f);
  CHECK(encode_flo(decode_flo(b)) == b);

  const auto dir = scratch_dir("flo");
  write_flo(dir / "a.flo", f);
  CHECK(read_flo(dir / "a.flo") == f);
  CHECK(read_file(dir / "a.flo") == b);
}

TEST_CASE("flo: every mutation of the magic is rejected at offset 0") {
  const Bytes good = encode_flo(FlowField(2, 2));
  for (int pos = 0; pos < 4; ++pos) {
    for (int v = 0; v < 256; ++v) {
      if (v == good[pos]) continue;
      Bytes bad = good;
      bad[pos] = static_cast<std::uint8_t>(v);
      CHECK(format_error_offset([&] { decode_flo(bad); }) == 0);
    }
  }
}

TEST_CASE("flo: truncation, trailing data and bad dimensions") {
  const Bytes good = encode_flo(FlowField(3, 2));
  for (std::size_t n = 0; n < good.size(); ++n) {
    CHECK_THROWS_AS(decode_flo(std::span(good).first(n)), FormatError);
  }
  Bytes longer = good;
  longer.push_back(0);
  CHECK_THROWS_AS(decode_flo(longer), FormatError);

  Bytes huge = good;
  for (int k = 4; k < 12; ++k) huge[k] = 0xff;
  huge[7] = 0x7f;
  huge[11] = 0x7f;
  CHECK(format_error_offset([&] { decode_flo(huge); }) == 4);
  Bytes negative = good;
  negative[7] = 0x80;
  CHECK_THROWS_AS(decode_flo(negative), FormatError);
}

TEST_CASE("pnm: 8-bit grayscale") {
  const Bytes b = raw("P5\n2 2\n255\n\x00\xff\x80\x40");
  const Image img = decode_pnm(b);
  REQUIRE(img.height() == 2);
  REQUIRE(img.width() == 2);
  CHECK(img[0] == 0.0);
  CHECK(img[1] == 1.0);
  CHECK(img[2] == 128.0 / 255.0);
  CHECK(img[3] == 64.0 / 255.0);
}

TEST_CASE("pnm: colour is reduced to luma") {
  CHECK(decode_pnm(raw("P6 1 1 255\n\xff\xff\xff"))[0] == 1.0);
  const Image c = decode_pnm(raw("P6\n# comment\n3 1\n255\n\xff\x00\x00\x00\xff\x00\x00\x00\xff"));
  CHECK(c[0] == doctest::Approx(0.299));
  CHECK(c[1] == doctest::Approx(0.587));
  CHECK(c[2] == doctest::Approx(0.114));
  const Image deep = decode_pnm(raw("P6 1 1 65535\n\xff\xff\xff\xff\xff\xff"));
  CHECK(deep[0] == 1.0);
}

TEST_CASE("pnm: 16-bit samples and comments") {
  const Bytes b = raw("P5 # size next\n1 2\n# depth\n65535\n\x00\x01\xff\xff");
  const Image img = decode_pnm(b);
  CHECK(img[0] == 1.0 / 65535.0);
  CHECK(img[1] == 1.0);
}

TEST_CASE("pnm: malformed and truncated inputs") {
  CHECK(format_error_offset([] { decode_pnm(bytes_of("P3\n1 1\n255\n0")); }) == 0);
  CHECK_THROWS_AS(decode_pnm(bytes_of("P5\nx 1\n255\n")), FormatError);
  CHECK_THROWS_AS(decode_pnm(raw("P5\n1 1\n70000\n\x01\x01")), FormatError);
  CHECK_THROWS_AS(decode_pnm(bytes_of("P5\n0 1\n255\n")), FormatError);
  CHECK_THROWS_AS(decode_pnm(bytes_of("P5\n1 1\n255")), FormatError);
  try {
    decode_pnm(raw("P5\n2 2\n255\n\x01\x02\x03"));
    FAIL("expected truncation error");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("expected 4 bytes") != std::string::npos);
    CHECK(msg.find("got 3") != std::string::npos);
  }
}

TEST_CASE("pgm writer round-trips through 16-bit quantization") {
  std::mt19937_64 rng(2);
  const Image img = random_grid(7, 5, rng, -0.2, 1.2);
  const Image back = decode_pnm(encode_pgm(img));
  for (std::size_t k = 0; k < img.size(); ++k) {
    CHECK(std::abs(back[k] - std::clamp(img[k], 0.0, 1.0)) <= 0.5 / 65535 + 1e-15);
  }
  CHECK(encode_pgm(back) == encode_pgm(img));
  const auto dir = scratch_dir("pgm");
  write_image(dir / "a.pgm", img);
  CHECK(read_image(dir / "a.pgm") == back);
}

TEST_CASE("params: round trips in every mode") {
  std::mt19937_64 rng(3);
  std::vector<TVNetParams> cases{TVNetParams::initial(), TVNetParams::constant(0.25, -1.0 / 3.0),
                                 TVNetParams::field(random_flow(3, 5, rng))};
  cases[2].kernels.div_x.taps = {-1.0000001, 0.9999};
  for (const TVNetParams& p : cases) {
    const Bytes b = encode_params(p);
    CHECK(std::memcmp(b.data(), "TVNETPRM", 8) == 0);
    CHECK(decode_params(b) == p);
    CHECK(encode_params(decode_params(b)) == b);
  }
  const auto dir = scratch_dir("params");
  write_params(dir / "p.bin", cases[2]);
  CHECK(read_params(dir / "p.bin") == cases[2]);
}

TEST_CASE("params: corrupt files are rejected") {
  const Bytes good = encode_params(TVNetParams::constant(1.0, 2.0));
  Bytes bad_tag = good;
  bad_tag[3] = 'x';
  CHECK(format_error_offset([&] { decode_params(bad_tag); }) == 0);
  Bytes bad_version = good;
  bad_version[8] = 9;
  CHECK(format_error_offset([&] { decode_params(bad_version); }) == 8);
  for (std::size_t n = 0; n < good.size(); ++n) {
    CHECK_THROWS_AS(decode_params(std::span(good).first(n)), FormatError);
  }
  Bytes trailing = good;
  trailing.push_back(1);
  CHECK_THROWS_AS(decode_params(trailing), FormatError);

  // image_x declared with two taps instead of three
  TVNetParams p = TVNetParams::initial();
  p.kernels.image_x.taps = {1.0, 2.0};
  CHECK_THROWS_AS(decode_params(encode_params(p)), FormatError);
}

TEST_CASE("config files") {
  const SolverConfig cfg = parse_config(
      "# solver\nlambda = 20\n  n_scales=3   # coarse\n\nn_iters = 12\neps_stop = 0\n");
  CHECK(cfg.lambda == 20.0);
  CHECK(cfg.n_scales == 3);
  CHECK(cfg.n_iters == 12);
  CHECK(cfg.eps_stop == 0.0);
  CHECK(cfg.n_warps == SolverConfig{}.n_warps);

  SolverConfig base;
  base.theta = 0.5;
  CHECK(parse_config("tau = 0.1\n", base).theta == 0.5);

  CHECK(format_error_offset([] { parse_config("lambda = 1\nbogus = 2\n"); }) == 11);
  CHECK_THROWS_AS(parse_config("lambda = fast\n"), FormatError);
  CHECK_THROWS_AS(parse_config("n_iters = 2.5\n"), FormatError);
  CHECK_THROWS_AS(parse_config("just words\n"), FormatError);

  const auto dir = scratch_dir("cfg");
  std::ofstream(dir / "c.cfg") << "n_warps = 2\n";
  CHECK(read_config(dir / "c.cfg").n_warps == 2);
}

TEST_CASE("pair lists resolve relative paths") {
  const auto dir = scratch_dir("pairs");
  std::filesystem::create_directories(dir / "seq");
  std::ofstream(dir / "list.txt") << "# header\nseq/a.pgm seq/b.pgm seq/gt.flo\n/abs/x.pgm /abs/y.pgm\n";
  const auto pairs = read_pair_list(dir / "list.txt");
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].image0 == dir / "seq/a.pgm");
  CHECK(pairs[0].flow == dir / "seq/gt.flo");
  CHECK(pairs[0].name == "seq");
  CHECK(pairs[1].image1 == "/abs/y.pgm");
  CHECK(pairs[1].flow.empty());

  std::ofstream(dir / "bad.txt") << "only_one.pgm\n";
  CHECK_THROWS_AS(read_pair_list(dir / "bad.txt"), FormatError);
}

TEST_CASE("colour wheel") {
  const ColorImage white = flow_to_color(FlowField(3, 4));
  CHECK(white.height == 3);
  CHECK(white.width == 4);
  for (auto c : white.rgb) CHECK(c == 255);

  CHECK(flow_vector_color(2.0, 0.0, 2.0) == Rgb{255, 0, 0});
  CHECK(flow_vector_color(1.0, 0.0, 2.0) == Rgb{255, 128, 128});
  // the wheel's 16th entry is pure yellow
  const double a = 2 * std::numbers::pi * 15.0 / 55.0;
  CHECK(flow_vector_color(std::cos(a), std::sin(a), 1.0) == Rgb{255, 255, 0});
  // beyond the maximum the colour darkens
  CHECK(flow_vector_color(4.0, 0.0, 2.0) == Rgb{191, 0, 0});

  FlowField ramp(1, 100);
  for (int k = 0; k < 100; ++k) ramp.u1[k] = k + 1;
  CHECK(magnitude_percentile99(ramp) == 99.0);
  CHECK(flow_to_color(ramp) == flow_to_color(ramp, 99.0));
}

TEST_CASE("rotating a rotational flow rotates its colours by a quarter turn of hue") {
  const int n = 9, c = 4;
  FlowField f(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      f.u1.at(x, y) = -(y - c);
      f.u2.at(x, y) = x - c;
    }
  }
  const double scale = 5.0;
  const ColorImage img = flow_to_color(f, scale);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int qx = c - (y - c), qy = c + (x - c);
      const double u1 = f.u1.at(x, y), u2 = f.u2.at(x, y);
      const Rgb turned = flow_vector_color(-u2, u1, scale);
      const std::size_t at = 3 * static_cast<std::size_t>(qy * n + qx);
      CHECK(Rgb{img.rgb[at], img.rgb[at + 1], img.rgb[at + 2]} == turned);
      // same magnitude, so the whiteness is unchanged
      const std::size_t here = 3 * static_cast<std::size_t>(y * n + x);
      CHECK(*std::min_element(img.rgb.begin() + here, img.rgb.begin() + here + 3) ==
            *std::min_element(img.rgb.begin() + at, img.rgb.begin() + at + 3));
    }
  }
}

TEST_CASE("ppm encoding") {
  const ColorImage img{1, 2, {1, 2, 3, 4, 5, 6}};
  const Bytes b = encode_ppm(img);
  CHECK(std::string(b.begin(), b.begin() + 11) == "P6\n2 1\n255\n");
  CHECK(b.size() == 17);
}

TEST_CASE("manifest serializes with sorted keys") {
  RunManifest m{"flow", config_snapshot(SolverConfig{}), {"a.pgm", "b.pgm"}, {"f.flo"},
                {{"zeta", 1.0}, {"alpha", 0.5}}, "2024-01-01T00:00:00Z"};
  const std::string json = m.to_json();
  CHECK(json.find("\"command\"") < json.find("\"config\""));
  CHECK(json.find("\"config\"") < json.find("\"inputs\""));
  CHECK(json.find("\"alpha\"") < json.find("\"zeta\""));
  CHECK(json.find("\"eps_div\"") < json.find("\"lambda\""));
  CHECK(json == m.to_json());
  const RunManifest back = RunManifest::from_json(json);
  CHECK(back.metrics == m.metrics);
  CHECK(back.config == m.config);
  CHECK(back.inputs == m.inputs);
  CHECK(utc_timestamp().size() == 20);
}

TEST_CASE("synthetic pairs") {
  const SyntheticPair z = synth_pair(SynthKind::translate, 32, 0.0, 5);
  CHECK(z.I0 == z.I1);
  CHECK(z.gt == FlowField(32, 32));
  const SyntheticPair b = synth_pair(SynthKind::blob_translate, 32, 1.0, 6);
  CHECK(b.gt == FlowField(Grid(32, 32, 1.0), Grid(32, 32, 0.0)));
  CHECK(synth_pair(SynthKind::rotate, 32, 2.0, 7).I0 == synth_pair(SynthKind::rotate, 32, 2.0, 7).I0);
  CHECK(synth_pair(SynthKind::translate, 32, 2.0, 7).I0 != synth_pair(SynthKind::translate, 32, 2.0, 8).I0);
  CHECK_THROWS_AS(synth_pair(SynthKind::translate, 32, 9.0, 0), std::invalid_argument);
  CHECK(parse_synth_kind("blob") == SynthKind::blob_translate);
  CHECK_THROWS_AS(parse_synth_kind("spiral"), std::invalid_argument);

  // the bilinear warp of I1 by the ground truth reproduces I0 away from the border
  const SyntheticPair t = synth_pair(SynthKind::translate, 32, 2.0, 9);
  const Image w = warp_bilinear(t.I1, t.gt);
  for (int y = 2; y < 30; ++y)
    for (int x = 2; x < 28; ++x) CHECK(w.at(x, y) == doctest::Approx(t.I0.at(x, y)).epsilon(1e-12));
}

}  // TEST_SUITE
