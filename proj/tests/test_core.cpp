#include <cmath>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "vinn/core.hpp"

using namespace vinn;
using core::DemoSet;
using core::FormatError;
using core::Frame;
using core::GripperState;

namespace {

DemoSet small_set(std::uint32_t obs_dim = 4) {
  std::mt19937_64 rng(7);
  DemoSet set;
  set.obs_dim = obs_dim;
  std::uniform_real_distribution<float> value(-1.0f, 1.0f);
  for (int d = 0; d < 2; ++d) {
    core::Demonstration demo;
    for (int t = 0; t < 3; ++t) {
      Frame f;
      f.observation.resize(obs_dim);
      for (auto& v : f.observation) v = value(rng);
      f.action.translation = {value(rng), value(rng), value(rng)};
      f.action.gripper = core::gripper_from_code(t % 4);
      f.timestep = static_cast<std::uint32_t>(t);
      f.demo_id = static_cast<std::uint32_t>(d);
      demo.push_back(std::move(f));
    }
    set.demos.push_back(std::move(demo));
  }
  return set;
}

}  // namespace

TEST_CASE("gripper codes round-trip through integer encoding") {
  for (int code = 0; code < 4; ++code) {
    CHECK(core::gripper_code(core::gripper_from_code(code)) == code);
  }
  CHECK_THROWS_AS(core::gripper_from_code(-1), std::out_of_range);
  CHECK_THROWS_AS(core::gripper_from_code(4), std::out_of_range);
}

TEST_CASE("save/load round-trips a small set") {
  const DemoSet set = small_set();
  CHECK(set.frame_count() == 6);
  const auto path = testutil::scratch_file("roundtrip_small.vinn");
  core::save_demoset(set, path);
  const DemoSet loaded = core::load_demoset(path);
  CHECK(loaded == set);
  CHECK(loaded.demos.size() == 2);
}

TEST_CASE("round-trip is the identity on randomized sets") {
  std::mt19937_64 rng(123);
  const auto path = testutil::scratch_file("roundtrip_random.vinn");
  for (int i = 0; i < 120; ++i) {
    const DemoSet set = testutil::random_demoset(rng);
    core::save_demoset(set, path);
    const DemoSet loaded = core::load_demoset(path);
    REQUIRE(loaded == set);
  }
}

TEST_CASE("two saves of the same set are byte-identical") {
  const DemoSet set = small_set();
  const auto p1 = testutil::scratch_file("det_a.vinn");
  const auto p2 = testutil::scratch_file("det_b.vinn");
  core::save_demoset(set, p1);
  core::save_demoset(set, p2);
  CHECK(testutil::read_bytes(p1) == testutil::read_bytes(p2));
}

TEST_CASE("missing file reports a distinct error") {
  try {
    core::load_demoset(testutil::scratch_file("does_not_exist.vinn"));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind == FormatError::Kind::MissingFile);
  }
}

TEST_CASE("corrupted magic is rejected") {
  const auto path = testutil::scratch_file("badmagic.vinn");
  core::save_demoset(small_set(), path);
  auto bytes = testutil::read_bytes(path);
  bytes[0] = 'X';
  testutil::write_bytes(path, bytes);
  try {
    core::load_demoset(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind == FormatError::Kind::BadMagic);
    CHECK(e.offset == 0);
  }
}

TEST_CASE("unsupported version is rejected") {
  const auto path = testutil::scratch_file("badversion.vinn");
  core::save_demoset(small_set(), path);
  auto bytes = testutil::read_bytes(path);
  bytes[4] = 0x7f;  // version little-endian at offset 4
  testutil::write_bytes(path, bytes);
  try {
    core::load_demoset(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind == FormatError::Kind::BadVersion);
    CHECK(e.offset == 4);
  }
}

TEST_CASE("truncation mid-frame reports the failing read offset") {
  const std::uint32_t obs_dim = 4;
  const auto path = testutil::scratch_file("trunc.vinn");
  core::save_demoset(small_set(obs_dim), path);
  const auto bytes = testutil::read_bytes(path);

  // Layout arithmetic: header 14 bytes, then frame_count u32, then frames of
  // 4*obs_dim + 16 bytes each.
  const std::size_t frames_start = 14 + 4;
  const std::size_t cut = frames_start + 9;  // mid way through the first observation
  testutil::write_bytes(path, {bytes.begin(), bytes.begin() + long(cut)});

  try {
    core::load_demoset(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind == FormatError::Kind::Truncated);
    // Reads advance float by float; the failing one began at the last whole
    // 4-byte boundary before the cut.
    const std::size_t expected = frames_start + 4 * ((cut - frames_start) / 4);
    CHECK(e.offset == expected);
  }
}

TEST_CASE("trailing bytes after metadata are rejected") {
  const auto path = testutil::scratch_file("trailing.vinn");
  core::save_demoset(small_set(), path);
  auto bytes = testutil::read_bytes(path);
  bytes.push_back(0xab);
  testutil::write_bytes(path, bytes);
  try {
    core::load_demoset(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind == FormatError::Kind::TrailingBytes);
  }
}

TEST_CASE("zero obs_dim in the header is a dimension error") {
  const auto path = testutil::scratch_file("zerodim.vinn");
  core::save_demoset(small_set(), path);
  auto bytes = testutil::read_bytes(path);
  bytes[6] = bytes[7] = bytes[8] = bytes[9] = 0;  // obs_dim u32 at offset 6
  testutil::write_bytes(path, bytes);
  try {
    core::load_demoset(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind == FormatError::Kind::DimensionMismatch);
    CHECK(e.offset == 6);
  }
}

TEST_CASE("metadata round-trips, including empty values") {
  DemoSet set = small_set();
  set.metadata[""] = "";
  set.metadata["note"] = "collected at desk \xc3\xa9";
  const auto path = testutil::scratch_file("meta.vinn");
  core::save_demoset(set, path);
  CHECK(core::load_demoset(path) == set);
}

TEST_CASE("normalize_actions: axis case") {
  DemoSet set = small_set();
  set.demos[0][0].action.translation = {3.0f, 0.0f, 0.0f};
  const DemoSet out = core::normalize_actions(set);
  CHECK(out.demos[0][0].action.translation[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(out.demos[0][0].action.translation[1] == 0.0f);
  CHECK(out.demos[0][0].action.translation[2] == 0.0f);
}

TEST_CASE("normalize_actions: diagonal gives 1/sqrt(3)") {
  DemoSet set = small_set();
  set.demos[0][0].action.translation = {1.0f, 1.0f, 1.0f};
  const DemoSet out = core::normalize_actions(set);
  for (int c = 0; c < 3; ++c) {
    CHECK(out.demos[0][0].action.translation[c] == doctest::Approx(0.57735026919).epsilon(1e-6));
  }
}

TEST_CASE("normalize_actions rejects near-zero translations, naming the frame") {
  DemoSet set = small_set();
  set.demos[1][2].action.translation = {0.0f, 0.0f, 0.0f};
  try {
    core::normalize_actions(set);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("demo 1") != std::string::npos);
    CHECK(msg.find("t=2") != std::string::npos);
  }
}

TEST_CASE("normalize_actions preserves direction and gripper, and is idempotent") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 50; ++i) {
    DemoSet set = testutil::random_demoset(rng);
    // Guard against randomly tiny translations.
    for (auto& demo : set.demos) {
      for (auto& f : demo) {
        if (std::abs(f.action.translation[0]) < 0.1f) f.action.translation[0] += 0.5f;
      }
    }
    const DemoSet once = core::normalize_actions(set);
    const DemoSet twice = core::normalize_actions(once);

    auto it_src = set.demos.begin();
    auto it_once = once.demos.begin();
    auto it_twice = twice.demos.begin();
    for (; it_src != set.demos.end(); ++it_src, ++it_once, ++it_twice) {
      for (std::size_t t = 0; t < it_src->size(); ++t) {
        const auto& a = (*it_src)[t].action.translation;
        const auto& b = (*it_once)[t].action.translation;
        const auto& c = (*it_twice)[t].action.translation;
        CHECK((*it_once)[t].action.gripper == (*it_src)[t].action.gripper);

        const double na = std::sqrt(double(a[0]) * a[0] + double(a[1]) * a[1] + double(a[2]) * a[2]);
        const double nb = std::sqrt(double(b[0]) * b[0] + double(b[1]) * b[1] + double(b[2]) * b[2]);
        REQUIRE(nb == doctest::Approx(1.0).epsilon(1e-6));
        const double dot = double(a[0]) * b[0] + double(a[1]) * b[1] + double(a[2]) * b[2];
        REQUIRE(dot / (na * nb) == doctest::Approx(1.0).epsilon(1e-9));
        for (int j = 0; j < 3; ++j) REQUIRE(std::abs(double(c[j]) - b[j]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("subsample_demos: identity, determinism, membership") {
  std::mt19937_64 rng(5);
  const DemoSet set = testutil::random_demoset(rng, 3);

  SUBCASE("n = |demos| preserves the set and order") {
    CHECK(core::subsample_demos(set, set.demos.size(), 42) == set);
  }
  SUBCASE("same seed gives the same selection") {
    const auto a = core::subsample_demos(set, 1, 11);
    const auto b = core::subsample_demos(set, 1, 11);
    CHECK(a == b);
  }
  SUBCASE("out-of-range n is rejected") {
    CHECK_THROWS_AS(core::subsample_demos(set, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(core::subsample_demos(set, set.demos.size() + 1, 1), std::invalid_argument);
  }
  SUBCASE("every selected demo is a verbatim member") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      for (std::size_t n = 1; n <= set.demos.size(); ++n) {
        const DemoSet sub = core::subsample_demos(set, n, seed);
        REQUIRE(sub.demos.size() == n);
        std::vector<core::Demonstration> pool = set.demos;
        for (const auto& demo : sub.demos) {
          auto it = std::find(pool.begin(), pool.end(), demo);
          REQUIRE(it != pool.end());
          pool.erase(it);  // multiset containment
        }
      }
    }
  }
}

TEST_CASE("validate rejects structural violations") {
  DemoSet set = small_set();
  SUBCASE("non-contiguous timesteps") {
    set.demos[0][1].timestep = 5;
    CHECK_THROWS_AS(set.validate(), std::invalid_argument);
  }
  SUBCASE("observation dim drift") {
    set.demos[0][1].observation.push_back(0.0f);
    CHECK_THROWS_AS(set.validate(), std::invalid_argument);
  }
  SUBCASE("empty demo") {
    set.demos.push_back({});
    CHECK_THROWS_AS(set.validate(), std::invalid_argument);
  }
  SUBCASE("non-finite translation") {
    set.demos[0][0].action.translation[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(set.validate(), std::invalid_argument);
  }
}

TEST_CASE("embedding matrix round-trips") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<float> value(-1.0f, 1.0f);
  const auto path = testutil::scratch_file("emb.vemb");
  for (int i = 0; i < 30; ++i) {
    core::EmbeddingMatrix emb;
    emb.dim = 1 + rng() % 6;
    const std::size_t n = 1 + rng() % 10;
    emb.data.resize(n * emb.dim);
    for (auto& v : emb.data) v = value(rng);
    emb.actions.resize(n);
    for (auto& a : emb.actions) {
      a = {value(rng), value(rng), value(rng), float(rng() % 4)};
    }
    emb.demo_ids.resize(n);
    emb.timesteps.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      emb.demo_ids[j] = static_cast<std::uint32_t>(rng() % 10);
      emb.timesteps[j] = static_cast<std::uint32_t>(j);
    }
    core::save_embeddings(emb, path);
    REQUIRE(core::load_embeddings(path) == emb);
  }
}
