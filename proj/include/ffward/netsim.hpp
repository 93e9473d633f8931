#pragma once

#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "ffward/binio.hpp"
#include "ffward/error.hpp"
#include "ffward/features.hpp"
#include "ffward/rng.hpp"

namespace ffward {

// ---------------------------------------------------------------------------
// Messages and wire codec
// ---------------------------------------------------------------------------
// Frame layout (little-endian):
//   kind u8, sender u16, period u32, payload_len u32, payload bytes.
// Payloads:
//   FrameBatch:    count u32, then per frame: index u32, D f32 features.
//   ScoreVector:   count u16, then count f32 scores.
//   StrategyOrder: count u16, then count u8 strategy codes.

enum class MsgKind : uint8_t { frame_batch = 1, score_vector = 2, strategy_order = 3 };

struct FrameBatchPayload {
  FrameSet frames;
  bool operator==(const FrameBatchPayload&) const = default;
};

struct ScoreVectorPayload {
  std::vector<float> scores;
  bool operator==(const ScoreVectorPayload&) const = default;
};

struct StrategyOrderPayload {
  std::vector<uint8_t> strategies;  // strategy codes, one per agent
  bool operator==(const StrategyOrderPayload&) const = default;
};

struct Message {
  uint16_t sender = 0;
  uint32_t period = 0;
  std::variant<FrameBatchPayload, ScoreVectorPayload, StrategyOrderPayload> payload;

  MsgKind kind() const {
    if (std::holds_alternative<FrameBatchPayload>(payload)) return MsgKind::frame_batch;
    if (std::holds_alternative<ScoreVectorPayload>(payload)) return MsgKind::score_vector;
    return MsgKind::strategy_order;
  }

  bool operator==(const Message&) const = default;
};

constexpr size_t kMsgHeaderSize = 1 + 2 + 4 + 4;

inline size_t payload_size(const Message& m) {
  if (const auto* fb = std::get_if<FrameBatchPayload>(&m.payload)) {
    size_t per_frame = 0;
    if (!fb->frames.empty()) per_frame = 4 + 4 * fb->frames.front().feature.size();
    return 4 + fb->frames.size() * per_frame;
  }
  if (const auto* sv = std::get_if<ScoreVectorPayload>(&m.payload))
    return 2 + 4 * sv->scores.size();
  const auto& so = std::get<StrategyOrderPayload>(m.payload);
  return 2 + so.strategies.size();
}

inline size_t encoded_size(const Message& m) { return kMsgHeaderSize + payload_size(m); }

inline std::vector<uint8_t> encode(const Message& m) {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(m.kind()));
  w.u16(m.sender);
  w.u32(m.period);
  w.u32(static_cast<uint32_t>(payload_size(m)));
  if (const auto* fb = std::get_if<FrameBatchPayload>(&m.payload)) {
    w.u32(static_cast<uint32_t>(fb->frames.size()));
    for (const SelectedFrame& f : fb->frames) {
      w.u32(f.index);
      for (float x : f.feature) w.f32(x);
    }
  } else if (const auto* sv = std::get_if<ScoreVectorPayload>(&m.payload)) {
    w.u16(static_cast<uint16_t>(sv->scores.size()));
    for (float x : sv->scores) w.f32(x);
  } else {
    const auto& so = std::get<StrategyOrderPayload>(m.payload);
    w.u16(static_cast<uint16_t>(so.strategies.size()));
    for (uint8_t s : so.strategies) w.u8(s);
  }
  return w.take();
}

inline Message decode(const std::vector<uint8_t>& buf) {
  ByteReader r(buf);
  if (r.remaining() < kMsgHeaderSize) fail(errc::short_buffer, "buffer shorter than header");
  const uint8_t kind = r.u8();
  Message m;
  m.sender = r.u16();
  m.period = r.u32();
  const uint32_t payload_len = r.u32();
  if (r.remaining() < payload_len) fail(errc::short_buffer, "payload shorter than declared");
  if (r.remaining() > payload_len) fail(errc::length_mismatch, "trailing bytes after payload");

  switch (kind) {
    case static_cast<uint8_t>(MsgKind::frame_batch): {
      FrameBatchPayload fb;
      const uint32_t count = r.u32();
      if (count > 0) {
        const size_t body = payload_len - 4;
        if (body % count != 0) fail(errc::length_mismatch, "frame batch body not divisible");
        const size_t per_frame = body / count;
        if (per_frame < 4 || (per_frame - 4) % 4 != 0)
          fail(errc::length_mismatch, "frame record size invalid");
        const size_t dim = (per_frame - 4) / 4;
        fb.frames.resize(count);
        for (SelectedFrame& f : fb.frames) {
          f.index = r.u32();
          f.feature.resize(dim);
          for (float& x : f.feature) x = r.f32();
        }
      } else if (payload_len != 4) {
        fail(errc::length_mismatch, "empty frame batch with nonzero body");
      }
      m.payload = std::move(fb);
      break;
    }
    case static_cast<uint8_t>(MsgKind::score_vector): {
      const uint16_t count = r.u16();
      if (payload_len != 2 + 4u * count) fail(errc::length_mismatch, "score vector size");
      ScoreVectorPayload sv;
      sv.scores.resize(count);
      for (float& x : sv.scores) x = r.f32();
      m.payload = std::move(sv);
      break;
    }
    case static_cast<uint8_t>(MsgKind::strategy_order): {
      const uint16_t count = r.u16();
      if (payload_len != 2 + 1u * count) fail(errc::length_mismatch, "strategy order size");
      StrategyOrderPayload so;
      so.strategies.resize(count);
      for (uint8_t& s : so.strategies) s = r.u8();
      m.payload = std::move(so);
      break;
    }
    default:
      fail(errc::unknown_kind, "message kind " + std::to_string(kind));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Channel with loss injection and byte accounting
// ---------------------------------------------------------------------------

enum class Bucket : uint8_t { p2p = 0, central = 1 };

struct KindStats {
  uint64_t attempted_count = 0;
  uint64_t attempted_bytes = 0;
  uint64_t delivered_count = 0;
  uint64_t delivered_bytes = 0;

  bool operator==(const KindStats&) const = default;
};

struct CommReport {
  // [bucket][kind-1] stats
  std::array<std::array<KindStats, 3>, 2> stats{};

  KindStats& at(Bucket b, MsgKind k) {
    return stats[static_cast<size_t>(b)][static_cast<size_t>(k) - 1];
  }
  const KindStats& at(Bucket b, MsgKind k) const {
    return stats[static_cast<size_t>(b)][static_cast<size_t>(k) - 1];
  }

  uint64_t attempted_bytes(Bucket b) const {
    uint64_t sum = 0;
    for (const KindStats& s : stats[static_cast<size_t>(b)]) sum += s.attempted_bytes;
    return sum;
  }
  uint64_t delivered_bytes(Bucket b) const {
    uint64_t sum = 0;
    for (const KindStats& s : stats[static_cast<size_t>(b)]) sum += s.delivered_bytes;
    return sum;
  }
  uint64_t total_attempted_bytes() const {
    return attempted_bytes(Bucket::p2p) + attempted_bytes(Bucket::central);
  }

  bool operator==(const CommReport&) const = default;
};

struct ChannelConfig {
  double loss_prob = 0.0;
  uint64_t seed = 0;

  void validate() const {
    require(loss_prob >= 0.0 && loss_prob <= 1.0, errc::invalid_config, "loss_prob in [0,1]");
  }
};

// Abstract channel: lossy sends, reliable sends (byte-counted but never
// dropped; used for the consensus score exchange), and per-recipient drains
// at the period barrier. Receive order is (sender, send ordinal).
class Channel {
 public:
  virtual ~Channel() = default;

  virtual bool send(const Message& m, uint16_t to, Bucket bucket) = 0;
  virtual bool send_reliable(const Message& m, uint16_t to, Bucket bucket) = 0;
  virtual std::vector<Message> drain(uint16_t to) = 0;

  const CommReport& report() const { return report_; }

 protected:
  struct Pending {
    uint64_t ordinal;
    Message msg;
  };

  void count(const Message& m, Bucket bucket, bool delivered) {
    KindStats& s = report_.at(bucket, m.kind());
    const uint64_t bytes = encoded_size(m);
    ++s.attempted_count;
    s.attempted_bytes += bytes;
    if (delivered) {
      ++s.delivered_count;
      s.delivered_bytes += bytes;
    }
  }

  void deliver(std::map<uint16_t, std::vector<Pending>>& boxes, uint16_t to, Message m) {
    boxes[to].push_back(Pending{next_ordinal_++, std::move(m)});
  }

  static std::vector<Message> take_sorted(std::vector<Pending>& box) {
    std::sort(box.begin(), box.end(), [](const Pending& a, const Pending& b) {
      if (a.msg.sender != b.msg.sender) return a.msg.sender < b.msg.sender;
      return a.ordinal < b.ordinal;
    });
    std::vector<Message> out;
    out.reserve(box.size());
    for (Pending& p : box) out.push_back(std::move(p.msg));
    box.clear();
    return out;
  }

  CommReport report_;
  uint64_t next_ordinal_ = 0;
};

// In-process channel. Messages are handed over as values; no serialization.
class SimChannel : public Channel {
 public:
  explicit SimChannel(const ChannelConfig& cfg) : cfg_(cfg), rng_(cfg.seed) { cfg_.validate(); }

  bool send(const Message& m, uint16_t to, Bucket bucket) override {
    const bool delivered = !(rng_.uniform() < cfg_.loss_prob);
    count(m, bucket, delivered);
    if (delivered) deliver(boxes_, to, m);
    return delivered;
  }

  bool send_reliable(const Message& m, uint16_t to, Bucket bucket) override {
    count(m, bucket, true);
    deliver(boxes_, to, m);
    return true;
  }

  std::vector<Message> drain(uint16_t to) override { return take_sorted(boxes_[to]); }

 private:
  ChannelConfig cfg_;
  Rng rng_;
  std::map<uint16_t, std::vector<Pending>> boxes_;
};

// Channel that pushes every delivered frame through a real stream socket
// (AF_UNIX socketpair) using the wire codec, then decodes it back off the
// stream. Semantically identical to SimChannel; exists to prove the codec
// over an actual byte stream.
class StreamChannel : public Channel {
 public:
  explicit StreamChannel(const ChannelConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    if (socketpair(AF_UNIX, SOCK_STREAM, 0, fds_) != 0)
      fail(errc::io_failure, "socketpair failed");
  }

  ~StreamChannel() override {
    close(fds_[0]);
    close(fds_[1]);
  }

  StreamChannel(const StreamChannel&) = delete;
  StreamChannel& operator=(const StreamChannel&) = delete;

  bool send(const Message& m, uint16_t to, Bucket bucket) override {
    const bool delivered = !(rng_.uniform() < cfg_.loss_prob);
    count(m, bucket, delivered);
    if (delivered) deliver(boxes_, to, round_trip(m));
    return delivered;
  }

  bool send_reliable(const Message& m, uint16_t to, Bucket bucket) override {
    count(m, bucket, true);
    deliver(boxes_, to, round_trip(m));
    return true;
  }

  std::vector<Message> drain(uint16_t to) override { return take_sorted(boxes_[to]); }

 private:
  Message round_trip(const Message& m) {
    const std::vector<uint8_t> wire = encode(m);
    write_all(wire.data(), wire.size());
    std::vector<uint8_t> frame(kMsgHeaderSize);
    read_all(frame.data(), kMsgHeaderSize);
    ByteReader header(frame.data(), frame.size());
    header.skip(1 + 2 + 4);
    const uint32_t payload_len = header.u32();
    frame.resize(kMsgHeaderSize + payload_len);
    read_all(frame.data() + kMsgHeaderSize, payload_len);
    return decode(frame);
  }

  void write_all(const uint8_t* p, size_t n) {
    while (n > 0) {
      const ssize_t w = ::write(fds_[0], p, n);
      if (w <= 0) fail(errc::io_failure, "stream write failed");
      p += w;
      n -= static_cast<size_t>(w);
    }
  }

  void read_all(uint8_t* p, size_t n) {
    while (n > 0) {
      const ssize_t r = ::read(fds_[1], p, n);
      if (r <= 0) fail(errc::io_failure, "stream read failed");
      p += r;
      n -= static_cast<size_t>(r);
    }
  }

  ChannelConfig cfg_;
  Rng rng_;
  int fds_[2];
  std::map<uint16_t, std::vector<Pending>> boxes_;
};

inline const CommReport& comm_report(const Channel& channel) { return channel.report(); }

}  // namespace ffward
