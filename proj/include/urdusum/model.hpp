#pragma once

// LSTM encoder-decoder with bilinear attention.
//
//   encoder:  embedding -> num_layers stacked LSTMs; PAD steps carry state.
//   decoder:  embedding(prev) -> stacked LSTMs initialised from the encoder
//             finals -> attention(top h, encoder states) -> W_out [ctx; h] + b.
//
// LSTM gate rows are stacked i, f, g, o (each H rows).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "urdusum/corpus.hpp"
#include "urdusum/error.hpp"
#include "urdusum/numerics.hpp"
#include "urdusum/rng.hpp"

namespace urdusum {

inline constexpr std::size_t kDefaultMaxTargetLen = 64;

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 64;
  std::size_t hidden_dim = 128;
  std::size_t num_layers = 1;
  std::size_t max_source_len = 400;
  std::size_t max_target_len = kDefaultMaxTargetLen;

  std::size_t layer_input_dim(std::size_t layer) const noexcept { return layer == 0 ? embedding_dim : hidden_dim; }

  void validate() const {
    if (vocab_size < Vocabulary::kMinSize) throw InvalidArgument("model vocab_size must be >= 5");
    if (embedding_dim == 0 || hidden_dim == 0 || num_layers == 0 || max_source_len == 0)
      throw InvalidArgument("model dimensions must be positive");
    if (max_target_len < 3) throw InvalidArgument("max_target_len must be >= 3 (SOS, token, EOS)");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LstmWeights {
  Matrix W;  // 4H x E_in
  Matrix U;  // 4H x H
  Matrix b;  // 4H x 1
};

/// Every trainable tensor of the model. Also used as the gradient set.
struct Parameters {
  Matrix embedding;  // V x E
  std::vector<LstmWeights> encoder;
  std::vector<LstmWeights> decoder;
  Matrix attention;   // H x H
  Matrix out_weight;  // V x 2H
  Matrix out_bias;    // V x 1

  static Parameters zeros(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t H = cfg.hidden_dim;
    Parameters p;
    p.embedding = Matrix(cfg.vocab_size, cfg.embedding_dim);
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
      const std::size_t in = cfg.layer_input_dim(l);
      p.encoder.push_back({Matrix(4 * H, in), Matrix(4 * H, H), Matrix(4 * H, 1)});
      p.decoder.push_back({Matrix(4 * H, in), Matrix(4 * H, H), Matrix(4 * H, 1)});
    }
    p.attention = Matrix(H, H);
    p.out_weight = Matrix(cfg.vocab_size, 2 * H);
    p.out_bias = Matrix(cfg.vocab_size, 1);
    return p;
  }

  /// Weights ~ U(-scale, scale) drawn in tensor order, biases zero except
  /// the forget gate (+1).
  static Parameters initialize(const ModelConfig& cfg, std::uint64_t seed, double scale = 0.08) {
    Parameters p = zeros(cfg);
    Rng rng(seed);
    auto fill = [&](Matrix& m) {
      for (double& v : m.values()) v = rng.uniform(-scale, scale);
    };
    fill(p.embedding);
    for (auto* stack : {&p.encoder, &p.decoder}) {
      for (auto& layer : *stack) {
        fill(layer.W);
        fill(layer.U);
        for (std::size_t r = cfg.hidden_dim; r < 2 * cfg.hidden_dim; ++r) layer.b(r, 0) = 1.0;
      }
    }
    fill(p.attention);
    fill(p.out_weight);
    return p;
  }

  /// Fixed declaration order; checkpoints and gradient checks rely on it.
  std::vector<Matrix*> tensors() { return collect<Matrix*>(*this); }
  std::vector<const Matrix*> tensors() const { return collect<const Matrix*>(*this); }

  static std::vector<std::string> tensor_names(std::size_t num_layers) {
    std::vector<std::string> names{"embedding"};
    for (const char* side : {"encoder", "decoder"})
      for (std::size_t l = 0; l < num_layers; ++l)
        for (const char* t : {"W", "U", "b"}) names.push_back(std::string(side) + "." + std::to_string(l) + "." + t);
    names.insert(names.end(), {"attention", "out_weight", "out_bias"});
    return names;
  }

  std::vector<Matrix> to_vector() const {
    std::vector<Matrix> out;
    for (const Matrix* m : tensors()) out.push_back(*m);
    return out;
  }

  static Parameters from_tensors(const ModelConfig& cfg, std::span<const Matrix> tensors) {
    Parameters p = zeros(cfg);
    auto dst = p.tensors();
    if (dst.size() != tensors.size()) throw ShapeMismatch("parameter tensor count mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (!dst[i]->same_shape(tensors[i])) throw ShapeMismatch("parameter tensor shape mismatch");
      *dst[i] = tensors[i];
    }
    return p;
  }

  /// (rows, cols) of every tensor in tensors() order.
  static std::vector<std::pair<std::size_t, std::size_t>> tensor_shapes(const ModelConfig& cfg) {
    const std::size_t H = cfg.hidden_dim;
    std::vector<std::pair<std::size_t, std::size_t>> shapes{{cfg.vocab_size, cfg.embedding_dim}};
    for (int side = 0; side < 2; ++side)
      for (std::size_t l = 0; l < cfg.num_layers; ++l)
        shapes.insert(shapes.end(), {{4 * H, cfg.layer_input_dim(l)}, {4 * H, H}, {4 * H, 1}});
    shapes.insert(shapes.end(), {{H, H}, {cfg.vocab_size, 2 * H}, {cfg.vocab_size, 1}});
    return shapes;
  }

  void check_shapes(const ModelConfig& cfg) const {
    const auto want = tensor_shapes(cfg);
    const auto have = tensors();
    if (want.size() != have.size()) throw ShapeMismatch("parameter tensor count does not match config");
    for (std::size_t i = 0; i < want.size(); ++i)
      if (have[i]->rows() != want[i].first || have[i]->cols() != want[i].second)
        throw ShapeMismatch("parameter tensor " + std::to_string(i) + " has wrong shape");
  }

  friend bool operator==(const Parameters& a, const Parameters& b) {
    const auto x = a.tensors();
    const auto y = b.tensors();
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!(*x[i] == *y[i])) return false;
    return true;
  }

 private:
  template <typename Ptr, typename Self>
  static std::vector<Ptr> collect(Self& self) {
    std::vector<Ptr> out{&self.embedding};
    for (auto* stack : {&self.encoder, &self.decoder})
      for (auto& layer : *stack) out.insert(out.end(), {&layer.W, &layer.U, &layer.b});
    out.insert(out.end(), {&self.attention, &self.out_weight, &self.out_bias});
    return out;
  }
};

// ---------------------------------------------------------------------------
// Embedding

inline Matrix embed(std::span<const TokenId> ids, const Parameters& p) {
  Matrix out(ids.size(), p.embedding.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] >= p.embedding.rows())
      throw IdOutOfRange("embedding id " + std::to_string(ids[k]) + " >= " + std::to_string(p.embedding.rows()));
    const auto src = p.embedding.row(ids[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// LSTM cell

/// Everything the backward pass needs from one cell evaluation.
struct LstmStepTrace {
  Vector x, h_prev, c_prev;
  Vector i, f, g, o;
  Vector c, tanh_c, h;
};

inline LstmStepTrace lstm_forward(std::span<const double> x, std::span<const double> h, std::span<const double> c,
                                  const LstmWeights& w) {
  const std::size_t H = w.U.cols();
  if (w.W.rows() != 4 * H || w.U.rows() != 4 * H || w.b.rows() != 4 * H || w.b.cols() != 1 || w.W.cols() != x.size() ||
      h.size() != H || c.size() != H)
    throw ShapeMismatch("lstm_step: inconsistent shapes");
  Vector z(w.b.values().begin(), w.b.values().end());
  gemv_acc(w.W, x, z);
  gemv_acc(w.U, h, z);

  LstmStepTrace t;
  t.x.assign(x.begin(), x.end());
  t.h_prev.assign(h.begin(), h.end());
  t.c_prev.assign(c.begin(), c.end());
  t.i.resize(H);
  t.f.resize(H);
  t.g.resize(H);
  t.o.resize(H);
  t.c.resize(H);
  t.tanh_c.resize(H);
  t.h.resize(H);
  for (std::size_t k = 0; k < H; ++k) {
    t.i[k] = sigmoid(z[k]);
    t.f[k] = sigmoid(z[H + k]);
    t.g[k] = std::tanh(z[2 * H + k]);
    t.o[k] = sigmoid(z[3 * H + k]);
    t.c[k] = t.f[k] * c[k] + t.i[k] * t.g[k];
    t.tanh_c[k] = std::tanh(t.c[k]);
    t.h[k] = t.o[k] * t.tanh_c[k];
  }
  return t;
}

struct LstmStepResult {
  Vector h;
  Vector c;
};

inline LstmStepResult lstm_step(std::span<const double> x, std::span<const double> h, std::span<const double> c,
                                const Matrix& W, const Matrix& U, const Matrix& b) {
  LstmWeights w{W, U, b};
  LstmStepTrace t = lstm_forward(x, h, c, w);
  return {std::move(t.h), std::move(t.c)};
}

// ---------------------------------------------------------------------------
// Encoder

struct EncoderOutput {
  Matrix states;  // L_src x H, top layer
  std::vector<Vector> final_h;
  std::vector<Vector> final_c;
  std::vector<bool> mask;  // true = real token

  std::size_t unmasked() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)); }
};

struct EncoderTrace {
  EncoderOutput output;
  // steps[layer][t]; empty traces (h.empty()) mark PAD steps.
  std::vector<std::vector<LstmStepTrace>> steps;
};

inline EncoderTrace trace_encoder(std::span<const TokenId> source, const Parameters& p, const ModelConfig& cfg) {
  if (source.size() != cfg.max_source_len)
    throw ShapeMismatch("source length " + std::to_string(source.size()) + " != " + std::to_string(cfg.max_source_len));
  const std::size_t L = source.size();
  const std::size_t H = cfg.hidden_dim;

  EncoderTrace tr;
  auto& out = tr.output;
  out.mask.resize(L);
  for (std::size_t t = 0; t < L; ++t) out.mask[t] = source[t] != kPad;

  Matrix inputs = embed(source, p);
  tr.steps.resize(cfg.num_layers);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    Vector h(H, 0.0), c(H, 0.0);
    Matrix hidden(L, H);
    tr.steps[l].resize(L);
    for (std::size_t t = 0; t < L; ++t) {
      if (out.mask[t]) {
        LstmStepTrace step = lstm_forward(inputs.row(t), h, c, p.encoder[l]);
        h = step.h;
        c = step.c;
        tr.steps[l][t] = std::move(step);
      }
      std::copy(h.begin(), h.end(), hidden.row(t).begin());
    }
    out.final_h.push_back(std::move(h));
    out.final_c.push_back(std::move(c));
    inputs = std::move(hidden);
  }
  out.states = std::move(inputs);
  return tr;
}

inline EncoderOutput encode_sequence(std::span<const TokenId> source, const Parameters& p, const ModelConfig& cfg) {
  return trace_encoder(source, p, cfg).output;
}

// ---------------------------------------------------------------------------
// Attention

struct AttentionResult {
  Vector context;
  Vector weights;  // zero at masked positions
  Vector query;    // W_a^T h, kept for the backward pass
};

/// score_i = h^T W_a s_i over unmasked positions, softmax, weighted sum.
inline AttentionResult attention(std::span<const double> h_dec, const EncoderOutput& enc, const Parameters& p) {
  const std::size_t L = enc.states.rows();
  const std::size_t H = enc.states.cols();
  if (h_dec.size() != H || p.attention.rows() != H || p.attention.cols() != H)
    throw ShapeMismatch("attention: inconsistent shapes");
  AttentionResult r;
  r.query.assign(H, 0.0);
  gemv_t_acc(p.attention, h_dec, r.query);

  Vector scores;
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < L; ++i) {
    if (!enc.mask[i]) continue;
    positions.push_back(i);
    scores.push_back(dot(r.query, enc.states.row(i)));
  }
  if (positions.empty()) throw NoUnmaskedPositions();
  const Vector probs = softmax(scores);

  r.weights.assign(L, 0.0);
  r.context.assign(H, 0.0);
  for (std::size_t k = 0; k < positions.size(); ++k) {
    r.weights[positions[k]] = probs[k];
    axpy(probs[k], enc.states.row(positions[k]), r.context);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Decoder

struct DecoderState {
  std::vector<Vector> h;
  std::vector<Vector> c;
  Vector attention_weights;  // empty before the first step
};

inline DecoderState initial_decoder_state(const EncoderOutput& enc) { return {enc.final_h, enc.final_c, {}}; }

struct DecoderStepTrace {
  TokenId input = kPad;
  std::vector<LstmStepTrace> layers;
  AttentionResult attention;
  Vector concat;  // [context ; h_top]
  Vector logits;
};

inline DecoderStepTrace trace_decoder_step(TokenId prev_id, const DecoderState& st, const EncoderOutput& enc,
                                           const Parameters& p, const ModelConfig& cfg) {
  if (prev_id >= cfg.vocab_size) throw IdOutOfRange("decoder input id " + std::to_string(prev_id) + " >= vocab size");
  if (st.h.size() != cfg.num_layers || st.c.size() != cfg.num_layers) throw ShapeMismatch("decoder state layer count");
  DecoderStepTrace tr;
  tr.input = prev_id;
  std::span<const double> x = p.embedding.row(prev_id);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    tr.layers.push_back(lstm_forward(x, st.h[l], st.c[l], p.decoder[l]));
    x = tr.layers.back().h;
  }
  const Vector& top = tr.layers.back().h;
  tr.attention = attention(top, enc, p);
  tr.concat = tr.attention.context;
  tr.concat.insert(tr.concat.end(), top.begin(), top.end());
  tr.logits.assign(p.out_bias.values().begin(), p.out_bias.values().end());
  gemv_acc(p.out_weight, tr.concat, tr.logits);
  return tr;
}

struct DecoderStepResult {
  Vector logits;
  DecoderState state;
};

inline DecoderStepResult decoder_step(TokenId prev_id, const DecoderState& st, const EncoderOutput& enc,
                                      const Parameters& p, const ModelConfig& cfg) {
  DecoderStepTrace tr = trace_decoder_step(prev_id, st, enc, p, cfg);
  DecoderStepResult r;
  r.logits = std::move(tr.logits);
  for (auto& layer : tr.layers) {
    r.state.h.push_back(std::move(layer.h));
    r.state.c.push_back(std::move(layer.c));
  }
  r.state.attention_weights = std::move(tr.attention.weights);
  return r;
}

// ---------------------------------------------------------------------------
// Teacher-forced forward pass

struct ForwardTrace {
  EncoderTrace encoder;
  std::vector<DecoderStepTrace> steps;  // one per scored target position
};

/// Step t feeds target[t] and predicts target[t + 1], up to and including EOS.
inline ForwardTrace trace_forward(const EncodedPair& pair, const Parameters& p, const ModelConfig& cfg) {
  validate_pair(pair, cfg.vocab_size, cfg.max_source_len, cfg.max_target_len);
  ForwardTrace tr;
  tr.encoder = trace_encoder(pair.source_ids, p, cfg);
  const std::size_t scored = eos_index(pair.target_ids);
  DecoderState st = initial_decoder_state(tr.encoder.output);
  for (std::size_t t = 0; t < scored; ++t) {
    tr.steps.push_back(trace_decoder_step(pair.target_ids[t], st, tr.encoder.output, p, cfg));
    const auto& layers = tr.steps.back().layers;
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
      st.h[l] = layers[l].h;
      st.c[l] = layers[l].c;
    }
  }
  return tr;
}

inline std::vector<Vector> forward_teacher_forced(const EncodedPair& pair, const Parameters& p,
                                                  const ModelConfig& cfg) {
  ForwardTrace tr = trace_forward(pair, p, cfg);
  std::vector<Vector> logits;
  logits.reserve(tr.steps.size());
  for (auto& s : tr.steps) logits.push_back(std::move(s.logits));
  return logits;
}

/// Summed cross-entropy and the number of scored positions. logits[k]
/// predicts target[k + 1]; PAD targets are skipped.
struct ScoredLoss {
  double total = 0.0;
  std::size_t count = 0;
};

inline ScoredLoss scored_cross_entropy(std::span<const Vector> logits, std::span<const TokenId> target,
                                       TokenId pad_id = kPad) {
  ScoredLoss s;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (k + 1 >= target.size()) throw ShapeMismatch("more logits than target positions");
    const TokenId y = target[k + 1];
    if (y == pad_id) continue;
    s.total += cross_entropy(softmax(logits[k]), y);
    ++s.count;
  }
  return s;
}

}  // namespace urdusum
