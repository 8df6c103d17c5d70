#pragma once

// Teacher-forced training: masked per-token cross-entropy, hand-derived
// backpropagation through the full encoder-decoder, global-norm clipping,
// SGD / Adam updates and the epoch loop.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "urdusum/corpus.hpp"
#include "urdusum/error.hpp"
#include "urdusum/model.hpp"
#include "urdusum/numerics.hpp"
#include "urdusum/rng.hpp"

namespace urdusum {

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 5.0;
  std::uint64_t seed = 1;
  /// Worker threads for per-pair backward passes; 0 = hardware concurrency.
  /// Results do not depend on this value.
  std::size_t threads = 1;

  void validate() const {
    if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
    if (!(grad_clip > 0.0)) throw InvalidArgument("grad_clip must be > 0");
    if (optimizer == OptimizerKind::adam && !(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0))
      throw InvalidArgument("adam needs 0 <= beta < 1 and epsilon > 0");
  }
};

struct TrainStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;  // nats per scored token
  double perplexity = 1.0;
  double wall_seconds = 0.0;
};

/// Mean cross-entropy over the scored positions.
inline double sequence_loss(std::span<const Vector> logits, std::span<const TokenId> target, TokenId pad_id = kPad) {
  const ScoredLoss s = scored_cross_entropy(logits, target, pad_id);
  if (s.count == 0) throw NoScoredPositions();
  return s.total / static_cast<double>(s.count);
}

// ---------------------------------------------------------------------------
// Backward pass

struct BackwardResult {
  double loss = 0.0;
  std::size_t scored = 0;
  Parameters grads;
};

namespace detail {

struct LstmGrads {
  Vector dx, dh_prev, dc_prev;
};

// dh, dc: gradient flowing into this step's h and c outputs.
inline LstmGrads lstm_backward(const LstmStepTrace& t, std::span<const double> dh, std::span<const double> dc_next,
                               const LstmWeights& w, LstmWeights& g) {
  const std::size_t H = t.h.size();
  Vector dz(4 * H);
  LstmGrads out{Vector(t.x.size(), 0.0), Vector(H, 0.0), Vector(H, 0.0)};
  for (std::size_t k = 0; k < H; ++k) {
    const double d_o = dh[k] * t.tanh_c[k];
    const double dc = dc_next[k] + dh[k] * t.o[k] * (1.0 - t.tanh_c[k] * t.tanh_c[k]);
    const double di = dc * t.g[k];
    const double dg = dc * t.i[k];
    const double df = dc * t.c_prev[k];
    out.dc_prev[k] = dc * t.f[k];
    dz[k] = di * t.i[k] * (1.0 - t.i[k]);
    dz[H + k] = df * t.f[k] * (1.0 - t.f[k]);
    dz[2 * H + k] = dg * (1.0 - t.g[k] * t.g[k]);
    dz[3 * H + k] = d_o * t.o[k] * (1.0 - t.o[k]);
  }
  outer_acc(g.W, dz, t.x);
  outer_acc(g.U, dz, t.h_prev);
  axpy(1.0, dz, g.b.values());
  gemv_t_acc(w.W, dz, out.dx);
  gemv_t_acc(w.U, dz, out.dh_prev);
  return out;
}

}  // namespace detail

/// Loss and exact gradients for one pair, by reverse traversal of the
/// teacher-forced forward pass.
inline BackwardResult backward(const EncodedPair& pair, const Parameters& p, const ModelConfig& cfg) {
  const ForwardTrace tr = trace_forward(pair, p, cfg);
  const std::size_t H = cfg.hidden_dim;
  const std::size_t top = cfg.num_layers - 1;
  const auto& enc = tr.encoder.output;
  const std::size_t L = enc.states.rows();

  BackwardResult res;
  res.grads = Parameters::zeros(cfg);
  {
    std::vector<Vector> logits;
    for (const auto& s : tr.steps) logits.push_back(s.logits);
    const ScoredLoss s = scored_cross_entropy(logits, pair.target_ids);
    if (s.count == 0) throw NoScoredPositions();
    res.loss = s.total / static_cast<double>(s.count);
    res.scored = s.count;
  }
  if (!std::isfinite(res.loss)) throw NonFiniteLoss();
  Parameters& g = res.grads;
  const double inv_n = 1.0 / static_cast<double>(res.scored);

  Matrix d_states(L, H);
  std::vector<Vector> carry_h(cfg.num_layers, Vector(H, 0.0));
  std::vector<Vector> carry_c(cfg.num_layers, Vector(H, 0.0));

  for (std::size_t t = tr.steps.size(); t-- > 0;) {
    const DecoderStepTrace& step = tr.steps[t];
    const TokenId y = pair.target_ids[t + 1];

    // d(-log(p_y + eps))/dz = p_y / (p_y + eps) * (p - onehot(y))
    Vector dz = softmax(step.logits);
    const double py = dz[y];
    const double scale = py / (py + kLogEpsilon) * inv_n;
    dz[y] -= 1.0;
    for (double& v : dz) v *= scale;

    outer_acc(g.out_weight, dz, step.concat);
    axpy(1.0, dz, g.out_bias.values());
    Vector d_concat(2 * H, 0.0);
    gemv_t_acc(p.out_weight, dz, d_concat);

    // Attention.
    const std::span<const double> d_context(d_concat.data(), H);
    Vector dh_top(d_concat.begin() + static_cast<std::ptrdiff_t>(H), d_concat.end());
    const auto& a = step.attention.weights;
    Vector da(L, 0.0);
    double weighted = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      if (!enc.mask[i]) continue;
      da[i] = dot(d_context, enc.states.row(i));
      weighted += a[i] * da[i];
      axpy(a[i], d_context, d_states.row(i));
    }
    Vector u(H, 0.0);  // sum_i dscore_i * s_i
    for (std::size_t i = 0; i < L; ++i) {
      if (!enc.mask[i]) continue;
      const double d_score = a[i] * (da[i] - weighted);
      axpy(d_score, enc.states.row(i), u);
      axpy(d_score, step.attention.query, d_states.row(i));
    }
    const Vector& h_top = step.layers[top].h;
    gemv_acc(p.attention, u, dh_top);
    outer_acc(g.attention, h_top, u);

    // Decoder LSTM stack, top to bottom.
    Vector dx_above = std::move(dh_top);
    for (std::size_t l = cfg.num_layers; l-- > 0;) {
      Vector dh = carry_h[l];
      axpy(1.0, dx_above, dh);
      detail::LstmGrads lg = detail::lstm_backward(step.layers[l], dh, carry_c[l], p.decoder[l], g.decoder[l]);
      carry_h[l] = std::move(lg.dh_prev);
      carry_c[l] = std::move(lg.dc_prev);
      dx_above = std::move(lg.dx);
    }
    axpy(1.0, dx_above, g.embedding.row(step.input));
  }

  // Encoder, top layer first; the decoder's initial-state gradient seeds
  // each layer's carry. PAD steps pass the carry through untouched.
  Matrix external = std::move(d_states);
  for (std::size_t l = cfg.num_layers; l-- > 0;) {
    Vector dh_carry = std::move(carry_h[l]);
    Vector dc_carry = std::move(carry_c[l]);
    Matrix d_inputs(L, cfg.layer_input_dim(l));
    for (std::size_t t = L; t-- > 0;) {
      if (!enc.mask[t]) continue;
      axpy(1.0, external.row(t), dh_carry);
      detail::LstmGrads lg = detail::lstm_backward(tr.encoder.steps[l][t], dh_carry, dc_carry, p.encoder[l], g.encoder[l]);
      dh_carry = std::move(lg.dh_prev);
      dc_carry = std::move(lg.dc_prev);
      std::copy(lg.dx.begin(), lg.dx.end(), d_inputs.row(t).begin());
    }
    external = std::move(d_inputs);
  }
  for (std::size_t t = 0; t < L; ++t)
    if (enc.mask[t]) axpy(1.0, external.row(t), g.embedding.row(pair.source_ids[t]));

  return res;
}

// ---------------------------------------------------------------------------
// Updates

inline double global_norm(const Parameters& grads) {
  double sq = 0.0;
  for (const Matrix* m : grads.tensors())
    for (double v : m->values()) sq += v * v;
  return std::sqrt(sq);
}

/// Scales every gradient by max_norm / norm when the global norm exceeds it.
inline void clip_by_global_norm(Parameters& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (!(norm > max_norm)) return;
  const double scale = max_norm / norm;
  for (Matrix* m : grads.tensors())
    for (double& v : m->values()) v *= scale;
}

struct OptimizerState {
  std::size_t step = 0;
  std::optional<Parameters> first_moment;
  std::optional<Parameters> second_moment;
};

inline void apply_update(Parameters& params, Parameters grads, OptimizerState& state, const TrainConfig& cfg) {
  clip_by_global_norm(grads, cfg.grad_clip);
  ++state.step;
  auto theta = params.tensors();
  const auto grad = std::as_const(grads).tensors();
  if (theta.size() != grad.size()) throw ShapeMismatch("apply_update: tensor count mismatch");
  for (std::size_t t = 0; t < theta.size(); ++t)
    if (!theta[t]->same_shape(*grad[t])) throw ShapeMismatch("apply_update: gradient shape mismatch");

  if (cfg.optimizer == OptimizerKind::sgd) {
    for (std::size_t t = 0; t < theta.size(); ++t) axpy(-cfg.learning_rate, grad[t]->values(), theta[t]->values());
    return;
  }

  if (!state.first_moment) {
    state.first_moment = grads;
    state.second_moment = grads;
    for (Matrix* m : state.first_moment->tensors()) m->fill(0.0);
    for (Matrix* m : state.second_moment->tensors()) m->fill(0.0);
  }
  auto m1 = state.first_moment->tensors();
  auto m2 = state.second_moment->tensors();
  const double step = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, step);
  const double bias2 = 1.0 - std::pow(cfg.beta2, step);
  for (std::size_t t = 0; t < theta.size(); ++t) {
    auto th = theta[t]->values();
    const auto gv = grad[t]->values();
    auto mv = m1[t]->values();
    auto vv = m2[t]->values();
    for (std::size_t i = 0; i < th.size(); ++i) {
      mv[i] = cfg.beta1 * mv[i] + (1.0 - cfg.beta1) * gv[i];
      vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * gv[i] * gv[i];
      const double m_hat = mv[i] / bias1;
      const double v_hat = vv[i] / bias2;
      th[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Loop

namespace detail {

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Backward passes for a batch; results land in input order so the
/// reduction below is independent of scheduling.
inline std::vector<BackwardResult> backward_batch(std::span<const EncodedPair* const> batch, const Parameters& p,
                                                  const ModelConfig& cfg, std::size_t threads) {
  std::vector<BackwardResult> results(batch.size());
  const std::size_t workers = std::min(threads, batch.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) results[i] = backward(*batch[i], p, cfg);
    return results;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < batch.size(); i += workers) results[i] = backward(*batch[i], p, cfg);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace detail

using EpochCallback = std::function<void(const TrainStats&)>;

/// Runs cfg.epochs passes over the corpus: shuffle with seed + epoch, split
/// into batches (last one may be short), average per-pair gradients, update.
inline std::vector<TrainStats> train(std::span<const EncodedPair> corpus, Parameters& params, const ModelConfig& mcfg,
                                     const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (corpus.empty()) throw InvalidArgument("training corpus is empty");
  params.check_shapes(mcfg);
  for (const auto& pair : corpus) validate_pair(pair, mcfg.vocab_size, mcfg.max_source_len, mcfg.max_target_len);

  const std::size_t threads = detail::resolve_threads(cfg.threads);
  OptimizerState opt;
  std::vector<TrainStats> history;
  std::vector<std::size_t> order(corpus.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed + epoch);
    rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t tokens = 0;
    std::size_t batch_no = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      ++batch_no;
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<const EncodedPair*> batch;
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&corpus[order[i]]);

      std::vector<BackwardResult> results;
      try {
        results = detail::backward_batch(batch, params, mcfg, threads);
      } catch (const NonFiniteLoss&) {
        throw NonFiniteLoss(epoch, batch_no);
      }

      Parameters total = std::move(results[0].grads);
      auto acc = total.tensors();
      for (std::size_t r = 1; r < results.size(); ++r) {
        const auto src = std::as_const(results[r].grads).tensors();
        for (std::size_t t = 0; t < acc.size(); ++t) axpy(1.0, src[t]->values(), acc[t]->values());
      }
      const double inv = 1.0 / static_cast<double>(results.size());
      for (Matrix* m : acc)
        for (double& v : m->values()) v *= inv;
      for (const auto& r : results) {
        loss_sum += r.loss * static_cast<double>(r.scored);
        tokens += r.scored;
      }
      if (!std::isfinite(loss_sum) || !std::isfinite(global_norm(total))) throw NonFiniteLoss(epoch, batch_no);
      apply_update(params, std::move(total), opt, cfg);
    }

    TrainStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(tokens);
    stats.perplexity = std::exp(stats.mean_loss);
    stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return history;
}

}  // namespace urdusum
