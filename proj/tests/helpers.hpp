#pragma once

// Shared test utilities: random data generators and a scratch directory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "vinn/core.hpp"

namespace testutil {

inline std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "vinn_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path scratch_file(const std::string& name) {
  return scratch_dir() / name;
}

inline vinn::core::DemoSet random_demoset(std::mt19937_64& rng, std::uint32_t obs_dim = 0,
                                          bool with_metadata = true) {
  using namespace vinn::core;
  std::uniform_int_distribution<int> demo_count(1, 5), frame_count(1, 6), dim_dist(1, 8);
  std::uniform_int_distribution<int> gripper(0, 3);
  std::uniform_real_distribution<float> value(-2.0f, 2.0f);

  DemoSet set;
  set.obs_dim = obs_dim ? obs_dim : static_cast<std::uint32_t>(dim_dist(rng));
  const int n_demos = demo_count(rng);
  for (int d = 0; d < n_demos; ++d) {
    Demonstration demo;
    const int n_frames = frame_count(rng);
    for (int t = 0; t < n_frames; ++t) {
      Frame f;
      f.observation.resize(set.obs_dim);
      for (auto& v : f.observation) v = value(rng);
      for (auto& v : f.action.translation) v = value(rng);
      f.action.gripper = gripper_from_code(gripper(rng));
      f.timestep = static_cast<std::uint32_t>(t);
      f.demo_id = static_cast<std::uint32_t>(d);
      demo.push_back(std::move(f));
    }
    set.demos.push_back(std::move(demo));
  }
  if (with_metadata && (rng() & 1)) {
    set.metadata["source"] = "random";
    set.metadata["tag"] = std::to_string(rng() % 1000);
  }
  return set;
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& b) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace testutil
