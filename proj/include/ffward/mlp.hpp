#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ffward/binio.hpp"
#include "ffward/error.hpp"
#include "ffward/rng.hpp"

namespace ffward {

// Minimal fully connected network: linear layers with ReLU between them and a
// linear output. Enough for the Q-value approximators used here; float32
// throughout, single-threaded, deterministic.

struct DenseLayer {
  uint32_t in = 0, out = 0;
  std::vector<float> w;  // row-major, out x in
  std::vector<float> b;  // out

  bool operator==(const DenseLayer& o) const = default;
};

struct Mlp {
  std::vector<DenseLayer> layers;

  uint32_t input_dim() const { return layers.front().in; }
  uint32_t output_dim() const { return layers.back().out; }

  bool operator==(const Mlp& o) const = default;

  static Mlp he_init(const std::vector<uint32_t>& sizes, Rng& rng) {
    require(sizes.size() >= 2, errc::invalid_config, "need at least input and output sizes");
    Mlp net;
    net.layers.resize(sizes.size() - 1);
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
      DenseLayer& layer = net.layers[l];
      layer.in = sizes[l];
      layer.out = sizes[l + 1];
      layer.w.resize(static_cast<size_t>(layer.in) * layer.out);
      layer.b.assign(layer.out, 0.0f);
      const double scale = std::sqrt(2.0 / static_cast<double>(layer.in));
      for (float& x : layer.w) x = static_cast<float>(rng.normal() * scale);
    }
    return net;
  }

  // Forward pass into caller-owned activation buffers; acts[l] holds the
  // post-activation output of layer l (the last one is linear).
  void forward(std::span<const float> x, std::vector<std::vector<float>>& acts) const {
    require(x.size() == input_dim(), errc::dim_mismatch,
            "input dim " + std::to_string(x.size()) + " != " + std::to_string(input_dim()));
    acts.resize(layers.size());
    const float* src = x.data();
    for (size_t l = 0; l < layers.size(); ++l) {
      const DenseLayer& layer = layers[l];
      acts[l].resize(layer.out);
      const bool last = l + 1 == layers.size();
      for (uint32_t r = 0; r < layer.out; ++r) {
        const float* wr = &layer.w[static_cast<size_t>(r) * layer.in];
        float acc = layer.b[r];
        for (uint32_t c = 0; c < layer.in; ++c) acc += wr[c] * src[c];
        acts[l][r] = last ? acc : (acc > 0.0f ? acc : 0.0f);
      }
      src = acts[l].data();
    }
  }

  std::vector<float> forward(std::span<const float> x) const {
    std::vector<std::vector<float>> acts;
    forward(x, acts);
    return acts.back();
  }
};

// Adam optimizer state, one moment pair per parameter.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  uint64_t step = 0;
  std::vector<std::vector<float>> mw, vw, mb, vb;

  explicit AdamState(const Mlp& net, double learning_rate) : lr(learning_rate) {
    for (const DenseLayer& l : net.layers) {
      mw.emplace_back(l.w.size(), 0.0f);
      vw.emplace_back(l.w.size(), 0.0f);
      mb.emplace_back(l.b.size(), 0.0f);
      vb.emplace_back(l.b.size(), 0.0f);
    }
  }
};

// One Q-regression sample: input, the action index whose value is trained,
// and the target value for it. Other outputs receive no gradient.
struct QSample {
  const float* x;
  uint32_t action;
  float target;
};

namespace detail {

inline void adam_update(std::vector<float>& p, const std::vector<float>& g, std::vector<float>& m,
                        std::vector<float>& v, const AdamState& s) {
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i];
    m[i] = static_cast<float>(s.beta1 * m[i] + (1.0 - s.beta1) * gi);
    v[i] = static_cast<float>(s.beta2 * v[i] + (1.0 - s.beta2) * gi * gi);
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= static_cast<float>(s.lr * mhat / (std::sqrt(vhat) + s.eps));
  }
}

}  // namespace detail

// Scratch space reused across training steps.
struct MlpWorkspace {
  std::vector<std::vector<float>> acts;
  std::vector<std::vector<float>> delta;
  std::vector<std::vector<float>> gw, gb;
};

// MSE regression step on the selected action outputs of a batch.
// Returns the batch loss before the update.
inline float train_q_batch(Mlp& net, AdamState& opt, std::span<const QSample> batch,
                           MlpWorkspace& ws) {
  const size_t num_layers = net.layers.size();
  ws.gw.resize(num_layers);
  ws.gb.resize(num_layers);
  ws.delta.resize(num_layers);
  for (size_t l = 0; l < num_layers; ++l) {
    ws.gw[l].assign(net.layers[l].w.size(), 0.0f);
    ws.gb[l].assign(net.layers[l].b.size(), 0.0f);
  }

  const float inv_batch = 1.0f / static_cast<float>(batch.size());
  float loss = 0.0f;
  for (const QSample& s : batch) {
    net.forward(std::span<const float>(s.x, net.input_dim()), ws.acts);
    const float err = ws.acts.back()[s.action] - s.target;
    loss += err * err * inv_batch;

    // Output delta: gradient only flows through the trained action.
    for (size_t l = 0; l < num_layers; ++l) ws.delta[l].assign(net.layers[l].out, 0.0f);
    ws.delta.back()[s.action] = 2.0f * err * inv_batch;

    for (size_t l = num_layers; l-- > 0;) {
      const DenseLayer& layer = net.layers[l];
      const float* input = l == 0 ? s.x : ws.acts[l - 1].data();
      std::vector<float>& d = ws.delta[l];
      // ReLU mask for hidden layers (acts already store post-activation).
      if (l + 1 != num_layers)
        for (uint32_t r = 0; r < layer.out; ++r)
          if (ws.acts[l][r] <= 0.0f) d[r] = 0.0f;
      for (uint32_t r = 0; r < layer.out; ++r) {
        const float dr = d[r];
        if (dr == 0.0f) continue;
        float* gw = &ws.gw[l][static_cast<size_t>(r) * layer.in];
        for (uint32_t c = 0; c < layer.in; ++c) gw[c] += dr * input[c];
        ws.gb[l][r] += dr;
      }
      if (l > 0) {
        std::vector<float>& prev = ws.delta[l - 1];
        for (uint32_t r = 0; r < layer.out; ++r) {
          const float dr = d[r];
          if (dr == 0.0f) continue;
          const float* wr = &layer.w[static_cast<size_t>(r) * layer.in];
          for (uint32_t c = 0; c < layer.in; ++c) prev[c] += dr * wr[c];
        }
      }
    }
  }

  ++opt.step;
  for (size_t l = 0; l < num_layers; ++l) {
    detail::adam_update(net.layers[l].w, ws.gw[l], opt.mw[l], opt.vw[l], opt);
    detail::adam_update(net.layers[l].b, ws.gb[l], opt.mb[l], opt.vb[l], opt);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Checkpoint format
// ---------------------------------------------------------------------------
// magic "FFWQ", version u16 (=1), kind u8, layer count u8, then per layer:
// rows u32, cols u32, rows*cols f32 weights row-major, rows f32 biases.

namespace detail {
constexpr char kPolicyMagic[4] = {'F', 'F', 'W', 'Q'};
constexpr uint16_t kPolicyVersion = 1;
}  // namespace detail

inline std::vector<uint8_t> encode_checkpoint(uint8_t kind, const Mlp& net) {
  ByteWriter w;
  w.bytes(detail::kPolicyMagic, 4);
  w.u16(detail::kPolicyVersion);
  w.u8(kind);
  w.u8(static_cast<uint8_t>(net.layers.size()));
  for (const DenseLayer& l : net.layers) {
    w.u32(l.out);
    w.u32(l.in);
    for (float x : l.w) w.f32(x);
    for (float x : l.b) w.f32(x);
  }
  return w.take();
}

inline std::pair<uint8_t, Mlp> decode_checkpoint(const std::vector<uint8_t>& buf) {
  ByteReader r(buf);
  {
    char magic[4];
    if (r.remaining() < 4) fail(errc::bad_magic, "file shorter than magic");
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (std::memcmp(magic, detail::kPolicyMagic, 4) != 0)
      fail(errc::bad_magic, "expected FFWQ magic");
  }
  const uint16_t version = r.u16();
  if (version != detail::kPolicyVersion)
    fail(errc::bad_version, "checkpoint version " + std::to_string(version));
  const uint8_t kind = r.u8();
  const uint8_t num_layers = r.u8();
  require(num_layers > 0, errc::dim_mismatch, "checkpoint with zero layers");
  Mlp net;
  net.layers.resize(num_layers);
  for (DenseLayer& l : net.layers) {
    l.out = r.u32();
    l.in = r.u32();
    require(l.out > 0 && l.in > 0, errc::dim_mismatch, "zero-sized layer");
    l.w.resize(static_cast<size_t>(l.in) * l.out);
    for (float& x : l.w) x = r.f32();
    l.b.resize(l.out);
    for (float& x : l.b) x = r.f32();
  }
  for (size_t l = 1; l < net.layers.size(); ++l)
    require(net.layers[l].in == net.layers[l - 1].out, errc::dim_mismatch,
            "layer dims do not chain");
  if (!r.done()) fail(errc::length_mismatch, std::to_string(r.remaining()) + " trailing bytes");
  return {kind, std::move(net)};
}

inline void save_checkpoint(const std::string& path, uint8_t kind, const Mlp& net) {
  write_file_bytes(path, encode_checkpoint(kind, net));
}

inline std::pair<uint8_t, Mlp> load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace ffward
