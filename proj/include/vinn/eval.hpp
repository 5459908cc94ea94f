#pragma once

// Offline evaluation harness: MSE metrics, k-sweeps, dataset-size sweeps,
// and latency accounting for the nearest-neighbor engine.

#include <iosfwd>
#include <map>
#include <memory>

#include "vinn/core.hpp"
#include "vinn/encoder.hpp"
#include "vinn/policy.hpp"

namespace vinn::eval {

// Mean squared error averaged over every scalar component: (1/3N) sum |p-t|^2.
double mse(const std::vector<std::array<double, 3>>& pred,
           const std::vector<std::array<double, 3>>& truth);

struct MseReport {
  double mse = 0.0;
  std::size_t frames = 0;
  std::string policy;
  std::string config;
};

// Per-frame translation predictor used by the offline metrics. Predictions
// are the raw regression outputs (no renormalization before MSE).
class OfflinePolicy {
 public:
  virtual ~OfflinePolicy() = default;
  virtual std::string name() const = 0;
  virtual std::string config() const { return {}; }
  virtual std::array<double, 3> predict_translation(const core::Frame& frame) = 0;
};

class VinnOffline final : public OfflinePolicy {
 public:
  VinnOffline(const policy::NeighborIndex& index, const encoder::Encoder& enc, std::size_t k);
  std::string name() const override { return "vinn"; }
  std::string config() const override;
  std::array<double, 3> predict_translation(const core::Frame& frame) override;

 private:
  const policy::NeighborIndex& index_;
  const encoder::Encoder& enc_;
  std::size_t k_;
};

class BcRepOffline final : public OfflinePolicy {
 public:
  BcRepOffline(const policy::BcHead& head, const encoder::Encoder& enc);
  std::string name() const override { return "bc_rep"; }
  std::array<double, 3> predict_translation(const core::Frame& frame) override;

 private:
  const policy::BcHead& head_;
  const encoder::Encoder& enc_;
};

class OpenLoopOffline final : public OfflinePolicy {
 public:
  explicit OpenLoopOffline(policy::OpenLoopPolicy policy);
  std::string name() const override { return "open_loop"; }
  std::array<double, 3> predict_translation(const core::Frame& frame) override;

 private:
  policy::OpenLoopPolicy policy_;
};

class RandomOffline final : public OfflinePolicy {
 public:
  explicit RandomOffline(std::uint64_t seed);
  std::string name() const override { return "random"; }
  std::array<double, 3> predict_translation(const core::Frame& frame) override;

 private:
  policy::RandomPolicy rng_;
};

MseReport eval_policy(OfflinePolicy& policy, const core::DemoSet& test);

struct SweepPoint {
  double x = 0.0;     // k or dataset size
  double mse = 0.0;   // mean across seeds
  double stddev = 0.0;
};

struct SweepCurve {
  std::vector<SweepPoint> points;  // x strictly increasing
  std::vector<std::uint64_t> seeds;
};

// MSE as a function of k for a fixed index/encoder. ks must be strictly
// increasing; the result is deterministic.
SweepCurve sweep_k(const policy::NeighborIndex& index, const encoder::Encoder& enc,
                   const core::DemoSet& test, const std::vector<std::size_t>& ks);

// One evaluated cell of the dataset-size sweep.
struct SweepCell {
  std::string policy;
  double x = 0.0;
  std::uint64_t seed = 0;
  double mse = 0.0;
};

struct SizeSweepResult {
  std::vector<SweepCell> cells;
  std::map<std::string, SweepCurve> curves;  // per policy, mean +- stddev across seeds
};

struct SizeSweepOptions {
  encoder::EncoderSpec enc_spec;       // byol_mlp spec used for vinn and bc_rep
  encoder::TrainOptions enc_train;
  policy::BcTrainOptions bc_train;
  std::size_t k = 10;
};

// For each size and seed: subsample whole demonstrations, retrain what each
// policy needs, evaluate on the fixed test set. Policy names: "vinn",
// "bc_rep", "open_loop", "random".
SizeSweepResult dataset_size_sweep(const core::DemoSet& train, const core::DemoSet& test,
                                   const std::vector<std::size_t>& sizes,
                                   const std::vector<std::uint64_t>& seeds,
                                   const std::vector<std::string>& policies,
                                   const SizeSweepOptions& opts);

struct LatencyReport {
  double encode_ms = 0.0;  // wall-clock mean per call
  double query_ms = 0.0;
  std::size_t index_size = 0;
  std::size_t dim = 0;
  std::size_t k = 0;
  std::size_t queries = 0;
};

// Warm wall-clock means over n_queries random observations (n_queries of at
// least 100).
LatencyReport latency_report(const policy::NeighborIndex& index, const encoder::Encoder& enc,
                             std::size_t n_queries, std::uint64_t seed, std::size_t k = 10);

// Tabular text output: one `policy x seed mse` row per cell, then a
// `policy x mean stddev` summary block.
void write_cells(std::ostream& out, const std::vector<SweepCell>& cells);
void write_summary(std::ostream& out, const std::map<std::string, SweepCurve>& curves);

}  // namespace vinn::eval
