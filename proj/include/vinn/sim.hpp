#pragma once

// Deterministic 3-D reach-grasp-pull environment with a scripted expert.
// The effector approaches a handle, closes the gripper within grasp range,
// and pulls the door along its axis; observations are the relative handle
// vector, a gripper one-hot, and per-cabinet distractor features.

#include <functional>
#include <iosfwd>
#include <random>

#include "vinn/core.hpp"
#include "vinn/encoder.hpp"
#include "vinn/policy.hpp"

namespace vinn::sim {

struct EnvConfig {
  double start_offset = 0.15;    // nominal approach distance (env units)
  double lateral_jitter = 0.05;  // reset randomization parallel to the door
  double step_size = 0.02;       // effector motion per unit action
  double grasp_radius = 0.02;    // Closed within this distance grasps
  double door_travel = 0.10;     // pull distance for a fully open door
  double open_threshold = 0.95;  // door_progress that counts as opened
  int distractor_dim = 5;
  double distractor_scale = 0.25;
  int n_cabinets = 3;
  std::vector<std::uint32_t> occlusion_mask;  // observation dims zeroed
  double obs_noise_std = 0.0;
  int max_steps = 40;

  std::uint32_t obs_dim() const { return 3 + 4 + static_cast<std::uint32_t>(distractor_dim); }
  void validate() const;
};

// Observation layout helpers.
constexpr std::uint32_t kRelHandleOffset = 0;  // dims 0..2
constexpr std::uint32_t kGripperOffset = 3;    // dims 3..6, one-hot
constexpr std::uint32_t kDistractorOffset = 7;

// Standard occlusion levels, mirroring progressively covered scenes:
// 0 none; 1 distractors hidden; 2 additionally the lateral/vertical handle
// components; 3 everything (the observation is identically zero).
std::vector<std::uint32_t> occlusion_mask_for_level(int level, const EnvConfig& cfg);

struct EnvState {
  std::array<double, 3> effector{};
  std::array<double, 3> handle{};
  double door_progress = 0.0;
  core::GripperState gripper = core::GripperState::Open;
  bool grasped = false;
  std::vector<double> distractors;
  int step = 0;
  int cabinet = 0;
  std::mt19937_64 noise_rng;
};

std::pair<EnvState, std::vector<float>> env_reset(const EnvConfig& cfg, std::uint64_t seed);

struct StepOutcome {
  std::vector<float> obs;
  bool done = false;
};

// Advances one step. Requires a unit translation (within 1e-3). Ungrasped
// motion is free; once grasped the effector rides the handle and only the
// pull-axis component of the action opens the door (progress never
// decreases).
StepOutcome env_step(EnvState& state, const core::Action& a, const EnvConfig& cfg);

// Scripted expert: approach the handle, close within reach, pull.
core::Action expert_action(const EnvState& state, const EnvConfig& cfg);

using Policy = std::function<core::Action(const EnvState&, std::span<const float>)>;
using PolicyFactory = std::function<Policy(std::uint64_t trial_seed)>;

struct TraceStep {
  int step = 0;
  std::vector<float> obs;
  core::Action action;
  std::array<double, 3> effector{};
  std::array<double, 3> handle{};
  double door_progress = 0.0;
  bool grasped = false;
};

struct RolloutResult {
  bool handle_grasped = false;
  bool door_opened = false;
  int steps_taken = 0;
  std::vector<TraceStep> trace;
};

RolloutResult rollout(const Policy& policy, const EnvConfig& cfg, std::uint64_t seed);

// (grasp_rate, open_rate) over n_trials independent seeds. Trials run in
// parallel; the factory builds one policy instance per trial.
std::pair<double, double> success_rate(const PolicyFactory& factory, const EnvConfig& cfg,
                                       int n_trials, std::uint64_t seed);

// Line-delimited trace export: one `key=value` record per step.
void write_trace(std::ostream& out, const RolloutResult& result);

// Synthetic demonstration generators. Registered names: "expert" (scripted
// expert episodes) and "random-walk" (uniform random unit actions).
core::DemoSet synth_demoset(const std::string& generator, std::size_t n_demos, std::uint64_t seed,
                            const EnvConfig& cfg = {});

// Closed-loop policy adapters.
Policy expert_policy(const EnvConfig& cfg);
Policy vinn_policy(const policy::NeighborIndex& index, const encoder::Encoder& enc,
                   policy::PolicyConfig cfg);
Policy random_unit_policy(std::uint64_t seed);
Policy bc_rep_policy(const policy::BcHead& head, const encoder::Encoder& enc);

}  // namespace vinn::sim
