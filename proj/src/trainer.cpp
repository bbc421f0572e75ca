#include "tvnet/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <numeric>
#include <ostream>

#include "tvnet/losses.hpp"
#include "tvnet/unrolled.hpp"

namespace tvnet {
namespace {

struct PairStep {
  double loss = 0.0;
  double epe = 0.0;
  GradientSet grads;
};

const Grid* mask_of(const TrainingPair& pair) { return pair.mask.empty() ? nullptr : &pair.mask; }

PairStep pair_step(const TrainingPair& pair, const TVNetParams& params, const SolverConfig& cfg,
                   double flow_weight) {
  ForwardResult fwd = forward(pair.I0, pair.I1, params, cfg);
  const LossValue task = epe(fwd.flow, pair.gt, mask_of(pair));
  LossValue total = task;
  if (flow_weight != 0.0) {
    total = multitask_combine(task, flow_energy(pair.I0, pair.I1, fwd.flow, cfg.lambda), flow_weight);
  }
  PairStep out{total.value, task.value, {}};
  if (std::isfinite(total.value)) out.grads = backward(fwd.tape, total.seed).grads;
  return out;
}

// Runs fn(k) for every k in [0, n) with at most `threads` in flight and
// returns the results in index order.
template <typename Fn>
auto run_ordered(std::size_t n, int threads, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
  std::vector<decltype(fn(std::size_t{}))> out;
  out.reserve(n);
  if (threads <= 1) {
    for (std::size_t k = 0; k < n; ++k) out.push_back(fn(k));
    return out;
  }
  for (std::size_t start = 0; start < n; start += threads) {
    const std::size_t stop = std::min(n, start + static_cast<std::size_t>(threads));
    std::vector<std::future<decltype(fn(std::size_t{}))>> batch;
    for (std::size_t k = start; k < stop; ++k) batch.push_back(std::async(std::launch::async, fn, k));
    for (auto& f : batch) out.push_back(f.get());
  }
  return out;
}

}  // namespace

TrainMode parse_train_mode(const std::string& name) {
  if (name == "u0" || name == "u0_only") return TrainMode::u0_only;
  if (name == "all") return TrainMode::all;
  throw std::invalid_argument("unknown training mode '" + name + "' (expected u0 or all)");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and non-negative");
  }
  if (max_iterations < 0) throw std::invalid_argument("max_iterations must be non-negative");
  if (log_every < 1) throw std::invalid_argument("log_every must be positive");
  if (!std::isfinite(flow_loss_weight) || flow_loss_weight < 0.0) {
    throw std::invalid_argument("flow_loss_weight must be finite and non-negative");
  }
  if (threads < 1) throw std::invalid_argument("threads must be positive");
}

double TrainRecord::mean_epe() const {
  if (pair_epe.empty()) return 0.0;
  return std::accumulate(pair_epe.begin(), pair_epe.end(), 0.0) / static_cast<double>(pair_epe.size());
}

TrainResult train(const std::vector<TrainingPair>& pairs, TVNetParams params,
                  const SolverConfig& solver_cfg, const TrainConfig& train_cfg) {
  if (pairs.empty()) throw std::invalid_argument("train: no training pairs");
  train_cfg.validate();
  solver_cfg.validate();

  TrainResult result;
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed_ms = [&] {
    if (!train_cfg.record_timing) return 0.0;
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };

  for (int it = 0; it <= train_cfg.max_iterations; ++it) {
    const bool final_step = it == train_cfg.max_iterations;
    const auto steps = run_ordered(pairs.size(), train_cfg.threads, [&](std::size_t k) {
      return pair_step(pairs[k], params, solver_cfg, train_cfg.flow_loss_weight);
    });

    TrainRecord rec;
    rec.iteration = it;
    GradientSet grads = GradientSet::zeros_like(params);
    for (const PairStep& s : steps) {
      rec.loss += s.loss;
      rec.pair_epe.push_back(s.epe);
      if (std::isfinite(s.loss)) grads.accumulate(s.grads);
    }
    if (train_cfg.mode == TrainMode::u0_only) {
      grads.values.kernels = GradientSet::zeros_like(TVNetParams::initial()).values.kernels;
    }
    const bool finite = std::isfinite(rec.loss) && grads.all_finite();
    rec.ms = elapsed_ms();
    if (!finite || final_step || it % train_cfg.log_every == 0) result.records.push_back(rec);
    if (!finite) {
      throw TrainingDiverged("training diverged at iteration " + std::to_string(it) +
                                 " (loss " + std::to_string(rec.loss) + ")",
                             result.records);
    }
    if (final_step) break;

    std::vector<double> flat = params.flatten();
    const std::vector<double> g = grads.flatten();
    for (std::size_t k = 0; k < flat.size(); ++k) flat[k] -= train_cfg.learning_rate * g[k];
    params.assign(flat);
  }
  result.params = std::move(params);
  return result;
}

std::vector<double> evaluate_pairs(const std::vector<TrainingPair>& pairs,
                                   const TVNetParams& params, const SolverConfig& solver_cfg,
                                   int threads) {
  if (pairs.empty()) throw std::invalid_argument("evaluate: no pairs");
  return run_ordered(pairs.size(), threads, [&](std::size_t k) {
    const FlowField flow = solve_multiscale(pairs[k].I0, pairs[k].I1, solver_cfg, params);
    return epe(flow, pairs[k].gt, mask_of(pairs[k])).value;
  });
}

double evaluate(const std::vector<TrainingPair>& pairs, const TVNetParams& params,
                const SolverConfig& solver_cfg, int threads) {
  const auto per_pair = evaluate_pairs(pairs, params, solver_cfg, threads);
  return std::accumulate(per_pair.begin(), per_pair.end(), 0.0) /
         static_cast<double>(per_pair.size());
}

void write_train_log(std::ostream& out, const std::vector<TrainRecord>& records) {
  out << "iteration,loss,mean_epe,ms\n";
  char line[160];
  for (const TrainRecord& r : records) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.3f\n", r.iteration, r.loss, r.mean_epe(),
                  r.ms);
    out << line;
  }
}

}  // namespace tvnet
