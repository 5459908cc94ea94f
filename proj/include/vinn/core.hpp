#pragma once

// Core demonstration data model: actions, frames, demo sets, the .vinn
// binary format, and the dataset utilities (normalization, subsampling).

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vinn::core {

// Discrete gripper stages, codes 0-3. The float form of a gripper command
// (used by the regression path) is just the code as a real number.
enum class GripperState : std::uint8_t {
  Open = 0,
  AlmostOpen = 1,
  AlmostClosed = 2,
  Closed = 3,
};

constexpr int gripper_code(GripperState g) { return static_cast<int>(g); }

GripperState gripper_from_code(int code);  // throws std::out_of_range outside 0-3
const char* gripper_name(GripperState g);

// Unit-norm translation delta plus a gripper command.
struct Action {
  std::array<float, 3> translation{0.0f, 0.0f, 0.0f};
  GripperState gripper = GripperState::Open;

  bool operator==(const Action&) const = default;
};

// One demonstration step: what was observed and what the expert did.
// demo_id records the demonstration's position at construction/load time
// and survives subsampling as provenance; timesteps are contiguous from 0
// within each demonstration.
struct Frame {
  std::vector<float> observation;
  Action action;
  std::uint32_t timestep = 0;
  std::uint32_t demo_id = 0;

  bool operator==(const Frame&) const = default;
};

using Demonstration = std::vector<Frame>;

struct DemoSet {
  std::vector<Demonstration> demos;
  std::uint32_t obs_dim = 0;
  std::map<std::string, std::string> metadata;

  std::size_t frame_count() const;

  // Enforces the structural invariants: non-empty demos, constant obs_dim,
  // contiguous timesteps, finite values.
  // Throws std::invalid_argument on the first violation.
  void validate() const;

  bool operator==(const DemoSet&) const = default;
};

// Flat embedding store parallel to the frames of a source DemoSet.
// actions[i] packs the translation and the gripper code as floats.
struct EmbeddingMatrix {
  std::uint32_t dim = 0;
  std::vector<float> data;  // n() x dim, row-major
  std::vector<std::array<float, 4>> actions;
  std::vector<std::uint32_t> demo_ids;
  std::vector<std::uint32_t> timesteps;

  std::size_t n() const { return actions.size(); }
  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }

  void validate() const;

  bool operator==(const EmbeddingMatrix&) const = default;
};

// File-format failure with the byte offset at which the failing read began.
struct FormatError : std::runtime_error {
  enum class Kind {
    MissingFile,
    BadMagic,
    BadVersion,
    DimensionMismatch,
    Truncated,
    TrailingBytes,
    BadValue,
    Unwritable,
  };

  FormatError(Kind kind, std::uint64_t offset, const std::string& what);

  Kind kind;
  std::uint64_t offset;
};

// Binary DemoSet format, magic "VINN". Little-endian f32 payloads; frame
// records are padded to 4-byte alignment; metadata key/value pairs trail
// the demos as length-prefixed UTF-8.
DemoSet load_demoset(const std::filesystem::path& path);
void save_demoset(const DemoSet& set, const std::filesystem::path& path);

// Embedding matrix format, magic "VEMB"; same row layout as the index file.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingMatrix& emb, const std::filesystem::path& path);

// Rescales every translation to unit L2 norm. Directions are preserved;
// gripper states are untouched. Translations with norm <= eps are a hard
// error naming each offending (demo_id, timestep).
DemoSet normalize_actions(const DemoSet& set, double eps = 1e-8);

// Picks n whole demonstrations uniformly without replacement, preserving
// dataset order. Deterministic given seed.
DemoSet subsample_demos(const DemoSet& set, std::size_t n, std::uint64_t seed);

}  // namespace vinn::core
