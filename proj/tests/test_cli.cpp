#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "tvnet/cli.hpp"
#include "tvnet/io.hpp"
#include "tvnet/losses.hpp"
#include "tvnet/manifest.hpp"
#include "tvnet/solver.hpp"
#include "tvnet/synth.hpp"

using namespace tvnet;
using namespace tvnet::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string p(const fs::path& path) { return path.string(); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with 1") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"flow", "a.pgm"}).code == kExitUsage);
  CHECK(cli({"train", "--pairs", "x.txt", "-o", "p.bin", "--mode", "half"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("missing and malformed files exit with 2") {
  const auto dir = scratch_dir("cli_io");
  CHECK(cli({"flow", p(dir / "nope0.pgm"), p(dir / "nope1.pgm"), "-o", p(dir / "f.flo")}).code == kExitIo);
  std::ofstream(dir / "junk.pgm") << "P5\n4 4\n255\nab";
  const Run r = cli({"flow", p(dir / "junk.pgm"), p(dir / "junk.pgm"), "-o", p(dir / "f.flo")});
  CHECK(r.code == kExitIo);
  CHECK(r.err.find("expected 16 bytes") != std::string::npos);

  write_image(dir / "a.pgm", Image(8, 8, 0.5));
  std::ofstream(dir / "bad.cfg") << "speed = 3\n";
  CHECK(cli({"flow", p(dir / "a.pgm"), p(dir / "a.pgm"), "-o", p(dir / "f.flo"), "--config",
             p(dir / "bad.cfg")})
            .code == kExitIo);
}

TEST_CASE("flow of identical frames is zero") {
  const auto dir = scratch_dir("cli_flow");
  std::mt19937_64 rng(1);
  write_image(dir / "a.pgm", smooth_image(32, 32, rng));
  const Run r = cli({"flow", p(dir / "a.pgm"), p(dir / "a.pgm"), "-o", p(dir / "f.flo"), "--scales",
                     "2", "--warps", "2", "--iters", "5", "--viz", p(dir / "f.ppm"), "--manifest",
                     p(dir / "m.json")});
  REQUIRE(r.code == kExitOk);
  CHECK(read_flo(dir / "f.flo") == FlowField(32, 32));
  const Bytes viz = read_file(dir / "f.ppm");
  CHECK(viz.size() == std::string("P6\n32 32\n255\n").size() + 3 * 32 * 32);
  const std::string json(read_file(dir / "m.json").begin(), read_file(dir / "m.json").end());
  const RunManifest m = RunManifest::from_json(json);
  CHECK(m.command == "flow");
  CHECK(m.config.at("n_scales") == "2");
  CHECK(m.outputs.size() == 2);
}

TEST_CASE("config file values are overridden by flags") {
  const auto dir = scratch_dir("cli_cfg");
  const SyntheticPair s = synth_pair(SynthKind::blob_translate, 32, 1.0, 2);
  write_image(dir / "a.pgm", s.I0);
  write_image(dir / "b.pgm", s.I1);
  std::ofstream(dir / "c.cfg") << "n_scales = 2\nn_warps = 1\nn_iters = 3\neps_stop = 0\n";
  REQUIRE(cli({"flow", p(dir / "a.pgm"), p(dir / "b.pgm"), "-o", p(dir / "f.flo"), "--config",
               p(dir / "c.cfg"), "--iters", "7"})
              .code == kExitOk);
  SolverConfig cfg;
  cfg.eps_stop = 0.0;
  cfg = cfg.with_shape(2, 1, 7);
  const FlowField expected = solve_multiscale(read_image(dir / "a.pgm"), read_image(dir / "b.pgm"), cfg);
  const FlowField got = read_flo(dir / "f.flo");
  CHECK(max_abs_diff(got.u1, expected.u1) <= 1e-6);
  CHECK(max_abs_diff(got.u2, expected.u2) <= 1e-6);
}

TEST_CASE("synth, flow and eval round trip") {
  const auto dir = scratch_dir("cli_eval");
  REQUIRE(cli({"synth", "--kind", "blob_translate", "--size", "32", "--mag", "1", "--seed", "4",
               "-o", p(dir / "pair")})
              .code == kExitOk);
  for (const char* name : {"frame0.pgm", "frame1.pgm", "flow.flo", "pairs.txt"}) {
    CHECK(fs::exists(dir / "pair" / name));
  }
  const std::vector<std::string> shape{"--scales", "2", "--warps", "1", "--iters", "10"};
  auto with_shape = [&](std::vector<std::string> args) {
    args.insert(args.end(), shape.begin(), shape.end());
    return args;
  };

  // in-memory EPE of the solver against the written ground truth
  const fs::path pd = dir / "pair";
  SolverConfig cfg = SolverConfig{}.with_shape(2, 1, 10);
  const FlowField flow = solve_multiscale(read_image(pd / "frame0.pgm"), read_image(pd / "frame1.pgm"), cfg);
  const double expected = epe(flow, read_flo(pd / "flow.flo")).value;

  const Run e = cli(with_shape({"eval", "--pairs", p(pd / "pairs.txt")}));
  REQUIRE(e.code == kExitOk);
  char line[64];
  std::snprintf(line, sizeof line, "%10.3f", expected);
  CHECK(e.out.find("TV-L1-2-1-10") != std::string::npos);
  CHECK(e.out.find(line) != std::string::npos);

  // ground truth equal to the produced flow evaluates to zero
  REQUIRE(cli(with_shape({"flow", p(pd / "frame0.pgm"), p(pd / "frame1.pgm"), "-o", p(dir / "est.flo")}))
              .code == kExitOk);
  std::ofstream(dir / "self.txt") << p(pd / "frame0.pgm") << " " << p(pd / "frame1.pgm") << " "
                                  << p(dir / "est.flo") << "\n";
  const Run z = cli(with_shape({"eval", "--pairs", p(dir / "self.txt")}));
  REQUIRE(z.code == kExitOk);
  CHECK(z.out.find("0.000") != std::string::npos);

  // the written flow reproduces the in-memory EPE to the printed precision
  const double from_file = epe(read_flo(dir / "est.flo"), read_flo(pd / "flow.flo")).value;
  char a[32], b[32];
  std::snprintf(a, sizeof a, "%.3f", from_file);
  std::snprintf(b, sizeof b, "%.3f", expected);
  CHECK(std::string(a) == std::string(b));
}

TEST_CASE("train with zero learning rate copies the parameters") {
  const auto dir = scratch_dir("cli_train");
  REQUIRE(cli({"synth", "--kind", "blob", "--size", "16", "--mag", "1", "-o", p(dir)}).code == kExitOk);
  write_params(dir / "init.bin", TVNetParams::constant(0.125, -0.5));
  const Run r = cli({"train", "--pairs", p(dir / "pairs.txt"), "--mode", "all", "--lr", "0",
                     "--iters", "3", "--scales", "1", "--warps", "1", "--solver-iters", "4",
                     "--params", p(dir / "init.bin"), "-o", p(dir / "out.bin"), "--log",
                     p(dir / "log.csv"), "--no-timing"});
  REQUIRE(r.code == kExitOk);
  CHECK(read_file(dir / "out.bin") == read_file(dir / "init.bin"));
  const Bytes log = read_file(dir / "log.csv");
  const std::string text(log.begin(), log.end());
  CHECK(text.rfind("iteration,loss,mean_epe,ms\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

TEST_CASE("train reports numerical failure with exit code 3") {
  const auto dir = scratch_dir("cli_nan");
  REQUIRE(cli({"synth", "--kind", "blob", "--size", "16", "--mag", "1", "-o", p(dir)}).code == kExitOk);
  const Run r = cli({"train", "--pairs", p(dir / "pairs.txt"), "--lr", "1e300", "--iters", "5",
                     "--scales", "1", "--warps", "1", "--solver-iters", "3", "-o", p(dir / "out.bin"),
                     "--log", p(dir / "log.csv")});
  CHECK(r.code == kExitNumerical);
  CHECK(fs::exists(dir / "log.csv"));
  CHECK_FALSE(fs::exists(dir / "out.bin"));
}

TEST_CASE("bench reports throughput") {
  const auto dir = scratch_dir("cli_bench");
  REQUIRE(cli({"synth", "--size", "16", "--mag", "1", "-o", p(dir)}).code == kExitOk);
  const Run r = cli({"bench", p(dir / "frame0.pgm"), p(dir / "frame1.pgm"), "--repeat", "3",
                     "--threads", "2", "--scales", "1", "--warps", "1", "--iters", "5"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("fps") != std::string::npos);
  CHECK(r.out.find("3 frames") != std::string::npos);
}

}  // TEST_SUITE
