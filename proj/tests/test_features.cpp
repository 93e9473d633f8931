#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ffward/features.hpp"

#include <cstdio>
#include <filesystem>

using namespace ffward;

namespace {

SynthConfig small_config(uint64_t seed) {
  SynthConfig cfg;
  cfg.num_views = 3;
  cfg.length = 400;
  cfg.dim = 8;
  cfg.num_events = 4;
  cfg.event_min_len = 20;
  cfg.event_max_len = 40;
  cfg.overlap_prob = 0.7;
  cfg.noise_std = 0.3;
  cfg.seed = seed;
  return cfg;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("generate_scene rejects invalid configs naming the field") {
  SynthConfig cfg = small_config(1);
  cfg.num_views = 1;
  CHECK_THROWS_WITH_AS(generate_scene(cfg), "invalid_config: num_views must be >= 2", Error);

  cfg = small_config(1);
  cfg.length = 100;
  try {
    generate_scene(cfg);
    FAIL("expected invalid_config");
  } catch (const Error& e) {
    CHECK(e.code() == errc::invalid_config);
    CHECK(std::string(e.what()).find("length") != std::string::npos);
  }

  cfg = small_config(1);
  cfg.overlap_prob = 1.5;
  CHECK_THROWS_AS(generate_scene(cfg), Error);
}

TEST_CASE("overlap probability 1 puts every event in every view") {
  SynthConfig cfg = small_config(7);
  cfg.overlap_prob = 1.0;
  const SceneDataset ds = generate_scene(cfg);
  for (size_t t = 0; t < ds.length(); ++t)
    for (const ViewStream& v : ds.views) CHECK(v.frames[t].label == ds.views[0].frames[t].label);
}

TEST_CASE("zero noise and full overlap leave only the per-view offset") {
  SynthConfig cfg = small_config(3);
  cfg.overlap_prob = 1.0;
  cfg.noise_std = 0.0;
  const SceneDataset ds = generate_scene(cfg);
  // feature(v, t) - feature(0, t) must be the same vector for every t.
  for (uint32_t v = 1; v < cfg.num_views; ++v) {
    std::vector<float> delta(cfg.dim);
    for (uint32_t d = 0; d < cfg.dim; ++d)
      delta[d] = ds.views[v].frames[0].feature[d] - ds.views[0].frames[0].feature[d];
    for (size_t t = 1; t < ds.length(); ++t)
      for (uint32_t d = 0; d < cfg.dim; ++d)
        CHECK(ds.views[v].frames[t].feature[d] - ds.views[0].frames[t].feature[d] ==
              doctest::Approx(delta[d]).epsilon(1e-6));
  }
}

TEST_CASE("same seed is bit-identical, different seeds differ") {
  const SceneDataset a = generate_scene(small_config(42));
  const SceneDataset b = generate_scene(small_config(42));
  CHECK(a == b);
  CHECK(encode_dataset(a) == encode_dataset(b));
  const SceneDataset c = generate_scene(small_config(43));
  CHECK_FALSE(a == c);
}

TEST_CASE("global truth is the element-wise OR of per-view labels") {
  const SceneDataset ds = generate_scene(small_config(11));
  for (size_t t = 0; t < ds.length(); ++t) {
    uint8_t any = 0;
    for (const ViewStream& v : ds.views) any |= v.frames[t].label;
    CHECK(ds.global_truth[t] == any);
  }
}

TEST_CASE("write/read round-trip is the identity over random configs") {
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    Rng rng(seed * 977);
    SynthConfig cfg = small_config(seed);
    cfg.num_views = 2 + static_cast<uint32_t>(rng.uniform_int(3));
    cfg.dim = 1 + static_cast<uint32_t>(rng.uniform_int(12));
    cfg.num_events = static_cast<uint32_t>(rng.uniform_int(6));
    const SceneDataset ds = generate_scene(cfg);
    const std::string path = temp_path("ffward_roundtrip.ffwd");
    write_dataset(ds, path);
    CHECK(read_dataset(path) == ds);
    std::filesystem::remove(path);
  }
}

TEST_CASE("reader rejects wrong magic, bad version, truncation, trailing bytes") {
  const SceneDataset ds = generate_scene(small_config(5));
  std::vector<uint8_t> bytes = encode_dataset(ds);

  SUBCASE("wrong magic") {
    std::vector<uint8_t> bad = bytes;
    bad[0] = 'X';
    try {
      decode_dataset(bad);
      FAIL("expected bad_magic");
    } catch (const Error& e) {
      CHECK(e.code() == errc::bad_magic);
    }
  }

  SUBCASE("bad version") {
    std::vector<uint8_t> bad = bytes;
    bad[4] = 9;
    try {
      decode_dataset(bad);
      FAIL("expected bad_version");
    } catch (const Error& e) {
      CHECK(e.code() == errc::bad_version);
    }
  }

  SUBCASE("truncated mid-frame reports the byte offset") {
    std::vector<uint8_t> bad(bytes.begin(), bytes.begin() + bytes.size() / 2);
    try {
      decode_dataset(bad);
      FAIL("expected truncated");
    } catch (const Error& e) {
      CHECK(e.code() == errc::truncated);
      CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
  }

  SUBCASE("trailing bytes rejected") {
    std::vector<uint8_t> bad = bytes;
    bad.push_back(0);
    try {
      decode_dataset(bad);
      FAIL("expected length_mismatch");
    } catch (const Error& e) {
      CHECK(e.code() == errc::length_mismatch);
    }
  }
}

TEST_CASE("desync of zero changes nothing") {
  const SceneDataset ds = generate_scene(small_config(9));
  CHECK(apply_desync(ds, 1, 0) == ds);
}

TEST_CASE("desync +20 then -20 restores interior frames") {
  const SceneDataset ds = generate_scene(small_config(13));
  const SceneDataset back = apply_desync(apply_desync(ds, 2, 20), 2, -20);
  const int64_t len = static_cast<int64_t>(ds.length());
  for (int64_t t = 20; t < len - 20; ++t) CHECK(back.views[2].frames[t] == ds.views[2].frames[t]);
  CHECK(back.global_truth == ds.global_truth);
}

TEST_CASE("desync +100 repeats the first frame over the leading tags") {
  SynthConfig cfg = small_config(17);
  cfg.length = 1000;
  const SceneDataset ds = generate_scene(cfg);
  const SceneDataset shifted = apply_desync(ds, 0, 100);
  for (int64_t t = 0; t <= 100; ++t) CHECK(shifted.views[0].frames[t] == ds.views[0].frames[0]);
  CHECK(shifted.views[0].frames[101] == ds.views[0].frames[1]);
  CHECK(shifted.views[0].desync_offset == 100);
}

TEST_CASE("desync rejects offsets as long as the stream") {
  const SceneDataset ds = generate_scene(small_config(19));
  try {
    apply_desync(ds, 0, static_cast<int32_t>(ds.length()));
    FAIL("expected out_of_range");
  } catch (const Error& e) {
    CHECK(e.code() == errc::out_of_range);
  }
}

TEST_CASE("make_identical_views copies view 0 everywhere") {
  const SceneDataset ds = make_identical_views(generate_scene(small_config(23)));
  for (const ViewStream& v : ds.views) CHECK(v.frames == ds.views[0].frames);
  for (size_t t = 0; t < ds.length(); ++t)
    CHECK(ds.global_truth[t] == ds.views[0].frames[t].label);
}
