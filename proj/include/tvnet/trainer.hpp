#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tvnet/grid.hpp"
#include "tvnet/params.hpp"
#include "tvnet/solver.hpp"

namespace tvnet {

enum class TrainMode {
  u0_only,  // kernel gradients are discarded
  all,
};

TrainMode parse_train_mode(const std::string& name);

struct TrainConfig {
  TrainMode mode = TrainMode::all;
  double learning_rate = 0.05;
  int max_iterations = 3000;
  int log_every = 1;
  std::uint64_t seed = 0;
  /// Weight of the un-linearized energy added to each pair's EPE; 0 trains on
  /// EPE alone.
  double flow_loss_weight = 0.0;
  /// When false, TrainRecord::ms is 0 so logs are reproducible byte for byte.
  bool record_timing = true;
  /// Pairs evaluated concurrently per iteration; accumulation order is fixed.
  int threads = 1;

  void validate() const;
};

struct TrainRecord {
  int iteration = 0;
  double loss = 0.0;  // summed over pairs
  std::vector<double> pair_epe;
  double ms = 0.0;

  double mean_epe() const;
};

struct TrainingPair {
  Image I0;
  Image I1;
  FlowField gt;
  Grid mask;  // empty: every pixel counts
  std::string name;
};

struct TrainResult {
  TVNetParams params;
  std::vector<TrainRecord> records;
};

/// Raised when the loss or its gradient stops being finite. records holds the
/// log up to and including the failing iteration.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, std::vector<TrainRecord> records)
      : NumericalError(what), records_(std::move(records)) {}
  const std::vector<TrainRecord>& records() const noexcept { return records_; }

 private:
  std::vector<TrainRecord> records_;
};

/// Full-batch gradient descent. Every iteration runs the unrolled network on
/// all pairs, sums the per-pair loss gradients in list order and steps by
/// -learning_rate * grad. Records are taken at iteration 0, every log_every
/// iterations, and once more for the final parameters (iteration ==
/// max_iterations).
TrainResult train(const std::vector<TrainingPair>& pairs, TVNetParams params,
                  const SolverConfig& solver_cfg, const TrainConfig& train_cfg);

/// Per-pair EPE of solve_multiscale(params) in list order.
std::vector<double> evaluate_pairs(const std::vector<TrainingPair>& pairs,
                                   const TVNetParams& params, const SolverConfig& solver_cfg,
                                   int threads = 1);

/// Mean of evaluate_pairs.
double evaluate(const std::vector<TrainingPair>& pairs, const TVNetParams& params,
                const SolverConfig& solver_cfg, int threads = 1);

/// CSV with header "iteration,loss,mean_epe,ms".
void write_train_log(std::ostream& out, const std::vector<TrainRecord>& records);

}  // namespace tvnet
