#include "tvnet/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "tvnet/io.hpp"
#include "tvnet/losses.hpp"
#include "tvnet/manifest.hpp"
#include "tvnet/pyramid.hpp"
#include "tvnet/solver.hpp"
#include "tvnet/synth.hpp"
#include "tvnet/trainer.hpp"
#include "tvnet/visualize.hpp"

namespace fs = std::filesystem;

namespace tvnet {
namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

// Solver flags shared by several subcommands; a config file is applied first
// and individual flags override it.
struct SolverFlags {
  std::string config_path;
  std::optional<int> scales, warps, iters;
  std::optional<double> lambda, theta, tau, eps_stop, scale_factor;

  void add_to(CLI::App* app, const std::string& iters_flag = "--iters") {
    app->add_option("--config", config_path, "key = value solver configuration file");
    app->add_option("--scales", scales, "pyramid levels");
    app->add_option("--warps", warps, "warps per level");
    app->add_option(iters_flag, iters, "iterations per warp");
    app->add_option("--lambda", lambda, "data-term weight");
    app->add_option("--theta", theta, "coupling parameter");
    app->add_option("--tau", tau, "dual step size");
    app->add_option("--eps-stop", eps_stop, "early-stopping threshold, 0 disables");
    app->add_option("--scale-factor", scale_factor, "pyramid decimation factor");
  }

  SolverConfig resolve() const {
    SolverConfig cfg;
    if (!config_path.empty()) cfg = read_config(config_path, cfg);
    if (scales) cfg.n_scales = *scales;
    if (warps) cfg.n_warps = *warps;
    if (iters) cfg.n_iters = *iters;
    if (lambda) cfg.lambda = *lambda;
    if (theta) cfg.theta = *theta;
    if (tau) cfg.tau = *tau;
    if (eps_stop) cfg.eps_stop = *eps_stop;
    if (scale_factor) cfg.scale_factor = *scale_factor;
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }
};

std::string arch_label(const SolverConfig& cfg, bool trained) {
  return std::string(trained ? "TVNet-" : "TV-L1-") + std::to_string(cfg.n_scales) + "-" +
         std::to_string(cfg.n_warps) + "-" + std::to_string(cfg.n_iters);
}

// The unrolled network runs without early stopping.
SolverConfig network_config(SolverConfig cfg) {
  cfg.eps_stop = 0.0;
  return cfg;
}

std::vector<TrainingPair> load_pairs(const fs::path& list) {
  std::vector<TrainingPair> pairs;
  for (const PairEntry& e : read_pair_list(list)) {
    if (e.flow.empty()) throw UsageError("pair list entry for " + e.name + " has no ground truth flow");
    TrainingPair p{read_image(e.image0), read_image(e.image1), read_flo(e.flow), {}, e.name};
    if (!p.I0.same_shape(p.I1) || !p.I0.same_shape(p.gt.u1)) {
      throw UsageError("pair " + e.name + ": image and flow sizes differ");
    }
    p.mask = validity_mask(p.gt);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void write_manifest(const std::string& path, RunManifest m) {
  if (path.empty()) return;
  m.timestamp = utc_timestamp();
  const std::string text = m.to_json();
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

struct FlowCmd {
  std::string img0, img1, output, params, viz, manifest;
  SolverFlags solver;

  void add_to(CLI::App* app) {
    app->add_option("img0", img0, "first frame (PGM/PPM)")->required();
    app->add_option("img1", img1, "second frame (PGM/PPM)")->required();
    app->add_option("-o,--output", output, "output .flo")->required();
    app->add_option("--params", params, "trained parameter file");
    app->add_option("--viz", viz, "colour-coded flow image (PPM)");
    app->add_option("--manifest", manifest, "JSON run manifest");
    solver.add_to(app);
  }

  int run(std::ostream& out) const {
    SolverConfig cfg = solver.resolve();
    const Image I0 = read_image(img0);
    const Image I1 = read_image(img1);
    if (!I0.same_shape(I1)) throw UsageError("frames have different sizes");
    TVNetParams p;
    if (!params.empty()) {
      p = read_params(params);
      cfg = network_config(cfg);
    }
    const FlowField flow = solve_multiscale(I0, I1, cfg, p);
    if (!flow.all_finite()) throw NumericalError("flow contains non-finite values");
    write_flo(output, flow);
    RunManifest m{"flow", config_snapshot(cfg), {img0, img1}, {output}, {}, {}};
    if (!params.empty()) m.inputs.push_back(params);
    if (!viz.empty()) {
      write_color_image(viz, flow_to_color(flow));
      m.outputs.push_back(viz);
    }
    write_manifest(manifest, m);
    out << "wrote " << output << " (" << flow.width() << "x" << flow.height() << ")\n";
    return kExitOk;
  }
};

struct EvalCmd {
  std::string pairs, params, manifest;
  int threads = 1;
  SolverFlags solver;

  void add_to(CLI::App* app) {
    app->add_option("--pairs", pairs, "pair list: img0 img1 gt.flo per line")->required();
    app->add_option("--params", params, "trained parameter file");
    app->add_option("--threads", threads, "pairs evaluated concurrently")->check(CLI::PositiveNumber);
    app->add_option("--manifest", manifest, "JSON run manifest");
    solver.add_to(app);
  }

  int run(std::ostream& out) const {
    SolverConfig cfg = solver.resolve();
    TVNetParams p;
    if (!params.empty()) {
      p = read_params(params);
      cfg = network_config(cfg);
    }
    const auto data = load_pairs(pairs);
    const auto per_pair = evaluate_pairs(data, p, cfg, threads);
    double sum = 0.0;
    char line[256];
    std::snprintf(line, sizeof line, "%-24s %10s\n", "pair", "EPE");
    out << line;
    RunManifest m{"eval", config_snapshot(cfg), {pairs}, {}, {}, {}};
    for (std::size_t k = 0; k < data.size(); ++k) {
      std::snprintf(line, sizeof line, "%-24s %10.3f\n", data[k].name.c_str(), per_pair[k]);
      out << line;
      sum += per_pair[k];
      m.metrics["epe/" + data[k].name] = per_pair[k];
    }
    const double avg = sum / static_cast<double>(data.size());
    std::snprintf(line, sizeof line, "%-24s %10.3f\n", arch_label(cfg, !params.empty()).c_str(), avg);
    out << line;
    m.metrics["average_epe"] = avg;
    if (!params.empty()) m.inputs.push_back(params);
    write_manifest(manifest, m);
    return kExitOk;
  }
};

struct TrainCmd {
  std::string pairs, mode = "all", output, log, init_params, init = "zero", manifest;
  double lr = 0.05;
  int iterations = 3000;
  int log_every = 1;
  int threads = 1;
  double flow_loss_weight = 0.0;
  bool no_timing = false;
  SolverFlags solver;

  void add_to(CLI::App* app) {
    app->add_option("--pairs", pairs, "pair list: img0 img1 gt.flo per line")->required();
    app->add_option("--mode", mode, "u0 or all")->check(CLI::IsMember({"u0", "all"}));
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--iters", iterations, "gradient steps");
    app->add_option("-o,--output", output, "output parameter file")->required();
    app->add_option("--log", log, "CSV training log");
    app->add_option("--log-every", log_every, "log interval")->check(CLI::PositiveNumber);
    app->add_option("--params", init_params, "initial parameter file");
    app->add_option("--init", init, "u0 parameterization when --params is absent")
        ->check(CLI::IsMember({"zero", "constant", "field"}));
    app->add_option("--threads", threads, "pairs processed concurrently")->check(CLI::PositiveNumber);
    app->add_option("--flow-loss-weight", flow_loss_weight, "weight of the energy term");
    app->add_flag("--no-timing", no_timing, "write 0 in the ms column");
    app->add_option("--manifest", manifest, "JSON run manifest");
    solver.add_to(app, "--solver-iters");
  }

  int run(std::ostream& out) const {
    const SolverConfig cfg = network_config(solver.resolve());
    const auto data = load_pairs(pairs);
    TVNetParams p;
    if (!init_params.empty()) {
      p = read_params(init_params);
    } else if (init == "constant") {
      p = TVNetParams::constant(0.0, 0.0);
    } else if (init == "field") {
      for (const auto& d : data) {
        if (!d.I0.same_shape(data.front().I0)) throw UsageError("--init field needs equally sized pairs");
      }
      int h = data.front().I0.height();
      int w = data.front().I0.width();
      for (const Resampler& r : build_pyramid(h, w, cfg.n_scales, cfg.scale_factor)) {
        h = r.out_height();
        w = r.out_width();
      }
      p = TVNetParams::field(FlowField(h, w));
    }

    TrainConfig tc;
    tc.mode = parse_train_mode(mode);
    tc.learning_rate = lr;
    tc.max_iterations = iterations;
    tc.log_every = log_every;
    tc.threads = threads;
    tc.flow_loss_weight = flow_loss_weight;
    tc.record_timing = !no_timing;
    try {
      tc.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }

    TrainResult result;
    try {
      result = train(data, p, cfg, tc);
    } catch (const TrainingDiverged& e) {
      if (!log.empty()) write_log(e.records());
      throw;
    }
    write_params(output, result.params);
    if (!log.empty()) write_log(result.records);
    const auto& records = result.records;

    const TrainRecord& first = records.front();
    const TrainRecord& last = records.back();
    out << "initial mean EPE " << fmt("%.4f", first.mean_epe()) << ", final mean EPE "
        << fmt("%.4f", last.mean_epe()) << " after " << last.iteration << " iterations\n";
    RunManifest m{"train", config_snapshot(cfg), {pairs}, {output}, {}, {}};
    m.config["mode"] = mode;
    m.config["learning_rate"] = fmt("%.17g", lr);
    m.config["train_iterations"] = std::to_string(iterations);
    m.metrics["initial_mean_epe"] = first.mean_epe();
    m.metrics["final_mean_epe"] = last.mean_epe();
    if (!init_params.empty()) m.inputs.push_back(init_params);
    if (!log.empty()) m.outputs.push_back(log);
    write_manifest(manifest, m);
    return kExitOk;
  }

  void write_log(const std::vector<TrainRecord>& records) const {
    std::ostringstream csv;
    write_train_log(csv, records);
    const std::string text = csv.str();
    write_file(log, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
};

struct SynthCmd {
  std::string kind = "translate", output;
  int size = 64;
  double magnitude = 3.0;
  std::uint64_t seed = 0;

  void add_to(CLI::App* app) {
    app->add_option("--kind", kind, "translate, rotate or blob_translate");
    app->add_option("--size", size, "image side length");
    app->add_option("--mag", magnitude, "displacement in pixels");
    app->add_option("--seed", seed, "random seed");
    app->add_option("-o,--output", output, "output directory")->required();
  }

  int run(std::ostream& out) const {
    SynthKind k;
    SyntheticPair pair;
    try {
      k = parse_synth_kind(kind);
      pair = synth_pair(k, size, magnitude, seed);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const fs::path dir(output);
    fs::create_directories(dir);
    write_image(dir / "frame0.pgm", pair.I0);
    write_image(dir / "frame1.pgm", pair.I1);
    write_flo(dir / "flow.flo", pair.gt);
    const std::string list = "frame0.pgm frame1.pgm flow.flo\n";
    write_file(dir / "pairs.txt", std::span(reinterpret_cast<const std::uint8_t*>(list.data()), list.size()));
    out << "wrote " << (dir / "pairs.txt").string() << "\n";
    return kExitOk;
  }
};

struct BenchCmd {
  std::string img0, img1, params;
  int repeat = 10;
  int threads = 1;
  SolverFlags solver;

  void add_to(CLI::App* app) {
    app->add_option("img0", img0, "first frame")->required();
    app->add_option("img1", img1, "second frame")->required();
    app->add_option("--repeat", repeat, "number of flow extractions")->check(CLI::PositiveNumber);
    app->add_option("--threads", threads, "extractions run concurrently")->check(CLI::PositiveNumber);
    app->add_option("--params", params, "trained parameter file");
    solver.add_to(app);
  }

  int run(std::ostream& out) const {
    SolverConfig cfg = solver.resolve();
    const Image I0 = read_image(img0);
    const Image I1 = read_image(img1);
    if (!I0.same_shape(I1)) throw UsageError("frames have different sizes");
    TVNetParams p;
    if (!params.empty()) {
      p = read_params(params);
      cfg = network_config(cfg);
    }
    const auto t0 = std::chrono::steady_clock::now();
    for (int done = 0; done < repeat; done += threads) {
      std::vector<std::future<FlowField>> batch;
      for (int k = done; k < std::min(repeat, done + threads); ++k) {
        batch.push_back(std::async(std::launch::async, [&] { return solve_multiscale(I0, I1, cfg, p); }));
      }
      for (auto& f : batch) f.get();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out << arch_label(cfg, !params.empty()) << " " << I0.width() << "x" << I0.height() << ": "
        << repeat << " frames in " << fmt("%.3f", secs) << " s, " << fmt("%.2f", repeat / secs)
        << " fps\n";
    return kExitOk;
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"TV-L1 optical flow and its trainable unrolled network", "tvnet"};
  app.require_subcommand(1, 1);

  FlowCmd flow;
  EvalCmd eval;
  TrainCmd train_cmd;
  SynthCmd synth;
  BenchCmd bench;
  auto* flow_app = app.add_subcommand("flow", "estimate flow between two frames");
  auto* eval_app = app.add_subcommand("eval", "average EPE over a pair list");
  auto* train_app = app.add_subcommand("train", "fit parameters by gradient descent");
  auto* synth_app = app.add_subcommand("synth", "write a synthetic pair with ground truth");
  auto* bench_app = app.add_subcommand("bench", "measure flow extraction throughput");
  flow.add_to(flow_app);
  eval.add_to(eval_app);
  train_cmd.add_to(train_app);
  synth.add_to(synth_app);
  bench.add_to(bench_app);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*flow_app) return flow.run(out);
    if (*eval_app) return eval.run(out);
    if (*train_app) return train_cmd.run(out);
    if (*synth_app) return synth.run(out);
    if (*bench_app) return bench.run(out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace tvnet
