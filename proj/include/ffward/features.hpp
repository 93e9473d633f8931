#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ffward/binio.hpp"
#include "ffward/error.hpp"
#include "ffward/rng.hpp"

namespace ffward {

// ---------------------------------------------------------------------------
// Frame / stream data model
// ---------------------------------------------------------------------------

// One frame: its feature vector plus a binary importance label.
struct FrameRecord {
  std::vector<float> feature;
  uint8_t label = 0;

  bool operator==(const FrameRecord& o) const = default;
};

// A frame selected by an agent, carrying its original stream index. This is
// what travels between agents and to the controller.
struct SelectedFrame {
  uint32_t index = 0;
  std::vector<float> feature;

  bool operator==(const SelectedFrame& o) const = default;
};

using FrameSet = std::vector<SelectedFrame>;

struct ViewStream {
  uint16_t view_id = 0;
  std::vector<FrameRecord> frames;
  // Net content shift applied by apply_desync, in frames. Bookkeeping only,
  // not part of the serialized format.
  int32_t desync_offset = 0;

  size_t length() const { return frames.size(); }

  bool operator==(const ViewStream& o) const = default;
};

struct SceneDataset {
  uint32_t dim = 0;
  std::vector<ViewStream> views;
  std::vector<uint8_t> global_truth;

  size_t num_views() const { return views.size(); }
  size_t length() const { return views.empty() ? 0 : views.front().length(); }

  bool operator==(const SceneDataset& o) const = default;
};

// Element-wise OR of per-view labels. Equivalent to min(sum_n labels_n, 1)
// for binary inputs.
inline std::vector<uint8_t> derive_global_truth(const std::vector<ViewStream>& views) {
  require(!views.empty(), errc::empty_input, "derive_global_truth: no views");
  std::vector<uint8_t> truth(views.front().length(), 0);
  for (const ViewStream& v : views) {
    require(v.length() == truth.size(), errc::length_mismatch, "views of unequal length");
    for (size_t t = 0; t < truth.size(); ++t)
      if (v.frames[t].label) truth[t] = 1;
  }
  return truth;
}

// ---------------------------------------------------------------------------
// Synthetic scene generator
// ---------------------------------------------------------------------------

struct SynthConfig {
  uint32_t num_views = 3;
  uint32_t length = 10000;
  uint32_t dim = 64;
  uint32_t num_events = 30;
  uint32_t event_min_len = 40;   // frames
  uint32_t event_max_len = 80;   // frames
  double overlap_prob = 0.85;    // per view-event pair
  double noise_std = 0.4;
  uint64_t seed = 1;

  void validate() const {
    require(num_views >= 2, errc::invalid_config, "num_views must be >= 2");
    require(length >= 200, errc::invalid_config, "length must be >= 200");
    require(dim >= 1, errc::invalid_config, "dim must be >= 1");
    require(event_min_len >= 1, errc::invalid_config, "event_min_len must be >= 1");
    require(event_max_len >= event_min_len, errc::invalid_config,
            "event_max_len must be >= event_min_len");
    require(event_max_len < length, errc::invalid_config, "event_max_len must be < length");
    require(overlap_prob >= 0.0 && overlap_prob <= 1.0, errc::invalid_config,
            "overlap_prob must be in [0,1]");
    require(noise_std >= 0.0, errc::invalid_config, "noise_std must be >= 0");
  }
};

namespace detail {

// Scene geometry constants. Every event sits at background + shared shift +
// its own jitter: the shift is what makes importance detectable on events
// never seen during training, so the jitter stays small against it. The
// per-view offset dominates the frame noise, putting cross-view similarities
// of the same content into a mid band while background-to-event distances
// stay far out of it.
constexpr double kContentBaseStd = 2.5;
constexpr double kEventShiftStd = 2.5;
constexpr double kEventJitterStd = 0.8;
constexpr double kViewOffsetStd = 0.8;

struct EventSpan {
  uint32_t start, len;
};

// One event per equal timeline cell, jittered inside it. Keeps events
// non-overlapping and spread over the whole stream at any density the cell
// size allows; cells too small for their event get the full cell.
inline std::vector<EventSpan> place_events(const SynthConfig& cfg, Rng& rng) {
  std::vector<EventSpan> placed;
  if (cfg.num_events == 0) return placed;
  const uint32_t cell = cfg.length / cfg.num_events;
  for (uint32_t e = 0; e < cfg.num_events; ++e) {
    uint32_t len =
        cfg.event_min_len +
        static_cast<uint32_t>(rng.uniform_int(cfg.event_max_len - cfg.event_min_len + 1));
    const uint32_t cell_start = e * cell;
    if (len + 2 > cell) len = cell > 2 ? cell - 2 : 1;
    const uint32_t slack = cell - len;  // >= 2 background frames between events
    const uint32_t offset = 1 + static_cast<uint32_t>(rng.uniform_int(slack > 1 ? slack - 1 : 1));
    placed.push_back({cell_start + offset, len});
  }
  return placed;
}

}  // namespace detail

// Builds an N-view scene. Every event has a content base vector shared across
// the views that carry it; each view adds a fixed offset vector and per-frame
// Gaussian noise. Frames outside events carry the (shared) background content
// and label 0. Fully determined by cfg.seed.
inline SceneDataset generate_scene(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  const uint32_t n = cfg.num_views, d = cfg.dim, len = cfg.length;

  auto draw_vec = [&](double std) {
    std::vector<float> v(d);
    for (uint32_t i = 0; i < d; ++i) v[i] = static_cast<float>(rng.normal() * std);
    return v;
  };

  const std::vector<float> background = draw_vec(detail::kContentBaseStd);
  const std::vector<float> event_shift = draw_vec(detail::kEventShiftStd);
  std::vector<std::vector<float>> view_offset(n);
  for (uint32_t v = 0; v < n; ++v) view_offset[v] = draw_vec(detail::kViewOffsetStd);

  const std::vector<detail::EventSpan> events = detail::place_events(cfg, rng);
  std::vector<std::vector<float>> event_base(events.size());
  for (size_t e = 0; e < events.size(); ++e) {
    event_base[e] = draw_vec(detail::kEventJitterStd);
    for (uint32_t i = 0; i < d; ++i) event_base[e][i] += background[i] + event_shift[i];
  }

  // Event membership per view; every event lands in at least one view.
  std::vector<std::vector<uint8_t>> in_view(events.size(), std::vector<uint8_t>(n, 0));
  for (size_t e = 0; e < events.size(); ++e) {
    bool any = false;
    for (uint32_t v = 0; v < n; ++v) {
      in_view[e][v] = rng.bernoulli(cfg.overlap_prob) ? 1 : 0;
      any = any || in_view[e][v];
    }
    if (!any) in_view[e][rng.uniform_int(n)] = 1;
  }

  // Frame-level content index: -1 background, otherwise event id.
  SceneDataset ds;
  ds.dim = d;
  ds.views.resize(n);
  for (uint32_t v = 0; v < n; ++v) {
    std::vector<int32_t> content(len, -1);
    for (size_t e = 0; e < events.size(); ++e) {
      if (!in_view[e][v]) continue;
      for (uint32_t t = events[e].start; t < events[e].start + events[e].len; ++t)
        content[t] = static_cast<int32_t>(e);
    }
    ViewStream& vs = ds.views[v];
    vs.view_id = static_cast<uint16_t>(v);
    vs.frames.resize(len);
    for (uint32_t t = 0; t < len; ++t) {
      const std::vector<float>& base = content[t] < 0 ? background : event_base[content[t]];
      FrameRecord& fr = vs.frames[t];
      fr.label = content[t] < 0 ? 0 : 1;
      fr.feature.resize(d);
      for (uint32_t i = 0; i < d; ++i)
        fr.feature[i] = base[i] + view_offset[v][i] +
                        static_cast<float>(rng.normal() * cfg.noise_std);
    }
  }
  ds.global_truth = derive_global_truth(ds.views);
  return ds;
}

// Replaces every view's content (frames and labels) with a copy of view 0 and
// rebuilds the global truth. Models the maximum-redundancy scenario where all
// cameras see the same data.
inline SceneDataset make_identical_views(SceneDataset ds) {
  require(!ds.views.empty(), errc::empty_input, "make_identical_views: no views");
  for (size_t v = 1; v < ds.views.size(); ++v) ds.views[v].frames = ds.views[0].frames;
  ds.global_truth = derive_global_truth(ds.views);
  return ds;
}

// Time window [begin, end) of a scene, re-indexed from 0. Used to split one
// scene into a training prefix and an evaluation remainder.
inline SceneDataset slice_scene(const SceneDataset& ds, uint32_t begin, uint32_t end) {
  require(begin < end && end <= ds.length(), errc::out_of_range, "bad slice bounds");
  SceneDataset out;
  out.dim = ds.dim;
  out.views.resize(ds.views.size());
  for (size_t v = 0; v < ds.views.size(); ++v) {
    out.views[v].view_id = ds.views[v].view_id;
    out.views[v].desync_offset = ds.views[v].desync_offset;
    out.views[v].frames.assign(ds.views[v].frames.begin() + begin,
                               ds.views[v].frames.begin() + end);
  }
  out.global_truth.assign(ds.global_truth.begin() + begin, ds.global_truth.begin() + end);
  return out;
}

// ---------------------------------------------------------------------------
// Dataset file format
// ---------------------------------------------------------------------------
// magic "FFWD", version u16 (=1), N u16, L u32, D u32, then N view blocks
// (view_id u16, L labels u8, L*D features f32 frame-major), then L bytes of
// global truth. Little-endian throughout. Anything else is rejected.

namespace detail {
constexpr char kDatasetMagic[4] = {'F', 'F', 'W', 'D'};
constexpr uint16_t kDatasetVersion = 1;
}  // namespace detail

inline std::vector<uint8_t> encode_dataset(const SceneDataset& ds) {
  require(!ds.views.empty(), errc::empty_input, "encode_dataset: no views");
  const size_t len = ds.length();
  require(len > 0, errc::empty_input, "encode_dataset: empty views");
  ByteWriter w;
  w.bytes(detail::kDatasetMagic, 4);
  w.u16(detail::kDatasetVersion);
  w.u16(static_cast<uint16_t>(ds.views.size()));
  w.u32(static_cast<uint32_t>(len));
  w.u32(ds.dim);
  for (const ViewStream& v : ds.views) {
    require(v.length() == len, errc::length_mismatch, "views of unequal length");
    w.u16(v.view_id);
    for (const FrameRecord& f : v.frames) w.u8(f.label);
    for (const FrameRecord& f : v.frames) {
      require(f.feature.size() == ds.dim, errc::dim_mismatch, "frame feature dim != dataset dim");
      for (float x : f.feature) w.f32(x);
    }
  }
  require(ds.global_truth.size() == len, errc::length_mismatch, "global_truth length != L");
  for (uint8_t b : ds.global_truth) w.u8(b);
  return w.take();
}

inline SceneDataset decode_dataset(const std::vector<uint8_t>& buf) {
  ByteReader r(buf);
  {
    char magic[4];
    if (r.remaining() < 4) fail(errc::bad_magic, "file shorter than magic");
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (std::memcmp(magic, detail::kDatasetMagic, 4) != 0)
      fail(errc::bad_magic, "expected FFWD magic");
  }
  const uint16_t version = r.u16();
  if (version != detail::kDatasetVersion)
    fail(errc::bad_version, "dataset version " + std::to_string(version));
  const uint16_t n = r.u16();
  const uint32_t len = r.u32();
  const uint32_t dim = r.u32();
  if (n == 0 || len == 0 || dim == 0)
    fail(errc::dim_mismatch, "degenerate header (N=" + std::to_string(n) +
                                 " L=" + std::to_string(len) + " D=" + std::to_string(dim) + ")");

  SceneDataset ds;
  ds.dim = dim;
  ds.views.resize(n);
  std::vector<uint8_t> seen_view(n, 0);
  for (uint16_t v = 0; v < n; ++v) {
    ViewStream& vs = ds.views[v];
    vs.view_id = r.u16();
    if (vs.view_id >= n) fail(errc::dim_mismatch, "view_id out of range");
    if (seen_view[vs.view_id]++) fail(errc::dim_mismatch, "duplicate view_id");
    vs.frames.resize(len);
    for (uint32_t t = 0; t < len; ++t) vs.frames[t].label = r.u8();
    for (uint32_t t = 0; t < len; ++t) {
      FrameRecord& f = vs.frames[t];
      f.feature.resize(dim);
      for (uint32_t i = 0; i < dim; ++i) f.feature[i] = r.f32();
    }
  }
  ds.global_truth.resize(len);
  for (uint32_t t = 0; t < len; ++t) ds.global_truth[t] = r.u8();
  if (!r.done()) fail(errc::length_mismatch, std::to_string(r.remaining()) + " trailing bytes");
  return ds;
}

inline void write_dataset(const SceneDataset& ds, const std::string& path) {
  write_file_bytes(path, encode_dataset(ds));
}

inline SceneDataset read_dataset(const std::string& path) {
  return decode_dataset(read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// Desynchronization
// ---------------------------------------------------------------------------

// Shifts one view's content relative to its time tags: after a shift of
// +k, time tag t shows the frame originally captured at t-k. Edge frames are
// repeated rather than wrapped, and labels move with their frames. The global
// truth stays put (truth is wall-clock).
inline SceneDataset apply_desync(SceneDataset ds, uint16_t view_id, int32_t offset_frames) {
  require(view_id < ds.views.size(), errc::out_of_range, "view_id out of range");
  const int64_t len = static_cast<int64_t>(ds.length());
  require(std::abs(static_cast<int64_t>(offset_frames)) < len, errc::out_of_range,
          "|offset| must be < stream length");
  if (offset_frames == 0) return ds;

  ViewStream& v = ds.views[view_id];
  std::vector<FrameRecord> shifted(v.frames.size());
  for (int64_t t = 0; t < len; ++t) {
    const int64_t src = std::clamp<int64_t>(t - offset_frames, 0, len - 1);
    shifted[t] = v.frames[src];
  }
  v.frames = std::move(shifted);
  v.desync_offset += offset_frames;
  return ds;
}

}  // namespace ffward
