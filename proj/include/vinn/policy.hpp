#pragma once

// Non-parametric policy core: exact nearest-neighbor search over embedded
// demonstration frames, softmin-weighted action regression, and the
// baseline policies (random, open-loop, behavior cloning on
// representations).

#include <filesystem>
#include <functional>
#include <optional>

#include "vinn/core.hpp"
#include "vinn/encoder.hpp"
#include "vinn/mlp.hpp"

namespace vinn::policy {

// Immutable store of (embedding, action) rows in dataset order. Gripper
// states live here as float codes 0.0-3.0.
struct NeighborIndex {
  std::uint32_t dim = 0;
  std::vector<float> embeddings;  // size() x dim, row-major
  std::vector<std::array<float, 4>> actions;
  std::vector<std::uint32_t> demo_ids;
  std::vector<std::uint32_t> timesteps;

  std::size_t size() const { return actions.size(); }
  std::span<const float> row(std::size_t i) const {
    return {embeddings.data() + i * dim, dim};
  }

  bool operator==(const NeighborIndex&) const = default;
};

NeighborIndex build_index(const core::EmbeddingMatrix& emb);

struct Neighbor {
  double distance = 0.0;
  std::array<float, 4> action{};  // translation + gripper code
  std::uint32_t row = 0;
};

// k entries sorted by ascending distance, ties broken by ascending row.
struct NeighborSet {
  std::vector<Neighbor> entries;
};

// Exact k-nearest rows by Euclidean distance. The default entry point scans
// in parallel; nearest_serial is the plain full-scan reference kept for
// testing and benchmarking. Both produce identical results.
NeighborSet nearest(const NeighborIndex& index, std::span<const float> query, std::size_t k);
NeighborSet nearest_serial(const NeighborIndex& index, std::span<const float> query,
                           std::size_t k);

struct LwrOutput {
  std::array<double, 3> translation{};
  double gripper = 0.0;
};

// Softmin-weighted average of the neighbor actions:
//   w_i = exp(-d_i) / sum_j exp(-d_j)
// applied componentwise to translations and gripper codes. With k = 1 this
// is a bit-exact copy of the neighbor's action.
LwrOutput lwr_action(const NeighborSet& nbrs);

struct PolicyConfig {
  std::size_t k = 10;
  std::array<double, 3> gripper_thresholds{0.5, 1.5, 2.5};  // ascending cut points
  bool renormalize_translation = false;
  std::array<double, 3> action_scale{0.5, 0.5, 0.5};

  void validate() const;
};

core::GripperState map_gripper(double gripper_float, const PolicyConfig& cfg);

// Full pipeline: encode -> nearest -> lwr -> optional renormalization ->
// gripper threshold mapping.
core::Action predict(const NeighborIndex& index, const encoder::Encoder& enc,
                     std::span<const float> obs, const PolicyConfig& cfg);

// predict plus the raw regression outputs, for offline metrics and serving
// diagnostics.
struct PredictDetail {
  core::Action action;
  std::array<double, 3> raw_translation{};
  double gripper_float = 0.0;
  double nearest_distance = 0.0;
};

PredictDetail predict_detail(const NeighborIndex& index, const encoder::Encoder& enc,
                             std::span<const float> obs, const PolicyConfig& cfg);

// Componentwise execution-time attenuation c (x) a; every c component must
// be in (0, 1].
core::Action scale_action(const core::Action& a, const std::array<double, 3>& c);

// Uniform random unit translations and uniform gripper states.
class RandomPolicy {
 public:
  explicit RandomPolicy(std::uint64_t seed);
  core::Action next();

 private:
  std::mt19937_64 rng_;
};

// Time-indexed mean of demonstrated actions; queries beyond the longest
// demonstration clamp to the last populated timestep.
class OpenLoopPolicy {
 public:
  static OpenLoopPolicy fit(const core::DemoSet& train);

  // Raw per-timestep means (translation not renormalized).
  std::array<double, 3> mean_translation(std::size_t t) const;
  double mean_gripper(std::size_t t) const;
  std::size_t max_timestep() const { return translations_.empty() ? 0 : translations_.size() - 1; }

  core::Action act(std::size_t t, const PolicyConfig& cfg) const;

 private:
  std::vector<std::array<double, 3>> translations_;
  std::vector<double> grippers_;
};

// Behavior-cloning head over frozen embeddings: an MLP for the translation
// and a linear layer for the 4-way gripper classification.
struct BcHead {
  nn::Mlp translation;  // embed_dim -> hidden -> 3
  nn::Mlp gripper;      // embed_dim -> 4, linear

  std::uint32_t embed_dim() const { return static_cast<std::uint32_t>(translation.in_dim()); }
};

struct BcTrainOptions {
  std::uint32_t epochs = 2000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden = {64};
};

// Full-batch training: mean squared error on translations plus
// cross-entropy on gripper classes. Deterministic given seed.
BcHead bc_rep_fit(const core::EmbeddingMatrix& emb, const BcTrainOptions& opts,
                  std::vector<double>* loss_curve = nullptr);

// Internal loss/gradient hook, exposed for finite-difference checks.
double bc_loss_and_grads(const BcHead& head, const core::EmbeddingMatrix& emb,
                         nn::Grads* translation_grads, nn::Grads* gripper_grads);

struct BcPrediction {
  std::array<double, 3> translation{};
  std::array<double, 4> logits{};
  core::GripperState gripper = core::GripperState::Open;
};

BcPrediction bc_rep_predict(const BcHead& head, std::span<const float> embedding);

// Index file format, magic "VIDX".
NeighborIndex load_index(const std::filesystem::path& path);
void save_index(const NeighborIndex& index, const std::filesystem::path& path);

}  // namespace vinn::policy
