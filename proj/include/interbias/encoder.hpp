// interbias/encoder.hpp

// Copyright 2026  The InterBias Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Stacked encoder with intermediate CTC heads and self-conditioning. Each
// block is pre-norm single-head self-attention plus a feed-forward, both with
// residual connections. At every conditioning layer n the intermediate
// posterior is computed with the shared output head, optionally rewritten by
// a caller-supplied hook, projected back to model dimension by the shared
// conditioning layer and added to the layer output before the next block.
//
// Training minimizes the mixed objective
//   (1-λ)·L_ctc(final) + λ/|N| · Σ_{n∈N} L_ctc(intermediate_n)
// by mini-batch gradient descent on the tape; the hook stays identity during
// training (biasing is inference-only).

#ifndef INTERBIAS_ENCODER_HPP_
#define INTERBIAS_ENCODER_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "interbias/autograd.hpp"
#include "interbias/ctc.hpp"
#include "interbias/errors.hpp"
#include "interbias/matrix.hpp"
#include "interbias/rng.hpp"
#include "interbias/vocab.hpp"

namespace interbias {

/// Rewrites an intermediate posterior before it conditions the next layer.
/// Returning nullopt keeps the grid untouched (plain self-conditioning); that
/// path also keeps gradients flowing during training.
using GridHook =
    std::function<std::optional<PosteriorGrid>(int layer, const PosteriorGrid&)>;

struct EncoderLayerParams {
  Matrix ln1_gain, ln1_bias;  // 1×D
  Matrix wq, wk, wv, wo;      // D×D
  Matrix ln2_gain, ln2_bias;  // 1×D
  Matrix w1, b1;              // D×H, 1×H
  Matrix w2, b2;              // H×D, 1×D
};

struct EncoderModel {
  int num_layers = 0;
  int dim = 0;
  int input_dim = 0;
  int hidden_dim = 0;
  std::vector<int> cond_layers;  // sorted subset of {1..num_layers-1}
  Vocabulary vocab;

  Matrix in_proj_w, in_proj_b;   // D_in×D, 1×D
  std::vector<EncoderLayerParams> layers;
  Matrix head_w, head_b;         // D×|V'|, 1×|V'| — shared by all heads
  Matrix cond_w, cond_b;         // |V'|×D, 1×D — shared across layers

  bool conditions_layer(int n) const {
    for (int c : cond_layers)
      if (c == n) return true;
    return false;
  }

  /// Deterministic initialization from the seed's "init" stream.
  static EncoderModel init(int num_layers, int dim, int input_dim, int hidden_dim,
                           std::vector<int> cond_layers, const Vocabulary& vocab,
                           uint64_t seed) {
    for (int n : cond_layers)
      if (n < 1 || n >= num_layers)
        throw std::invalid_argument("cond_layers must lie in [1, num_layers)");
    EncoderModel m;
    m.num_layers = num_layers;
    m.dim = dim;
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    m.cond_layers = std::move(cond_layers);
    std::sort(m.cond_layers.begin(), m.cond_layers.end());
    m.vocab = vocab;

    SplitMix64 rng = SplitMix64(seed).stream("init");
    auto dense = [&](int rows, int cols, double gain = 1.0) {
      Matrix w(rows, cols);
      double s = gain / std::sqrt(static_cast<double>(rows));
      for (double& v : w.data()) v = rng.next_normal() * s;
      return w;
    };
    // Residual branch outputs (wo, w2) start near zero and the output head
    // starts small; without this, fixed-rate gradient descent on the CTC
    // objective overshoots in the first epochs and collapses the posteriors.
    const double kResidualGain = 0.1;
    const double kHeadGain = 0.5;
    int vp = vocab.size();
    m.in_proj_w = dense(input_dim, dim);
    m.in_proj_b = Matrix(1, dim);
    m.layers.resize(num_layers);
    for (EncoderLayerParams& L : m.layers) {
      L.ln1_gain = Matrix(1, dim, 1.0);
      L.ln1_bias = Matrix(1, dim);
      L.wq = dense(dim, dim);
      L.wk = dense(dim, dim);
      L.wv = dense(dim, dim);
      L.wo = dense(dim, dim, kResidualGain);
      L.ln2_gain = Matrix(1, dim, 1.0);
      L.ln2_bias = Matrix(1, dim);
      L.w1 = dense(dim, hidden_dim);
      L.b1 = Matrix(1, hidden_dim);
      L.w2 = dense(hidden_dim, dim, kResidualGain);
      L.b2 = Matrix(1, dim);
    }
    m.head_w = dense(dim, vp, kHeadGain);
    m.head_b = Matrix(1, vp);
    m.cond_w = dense(vp, dim, kResidualGain);
    m.cond_b = Matrix(1, dim);
    return m;
  }

  /// Visits every parameter in the fixed serialization/update order.
  template <typename Fn>
  void visit_params(Fn&& fn) {
    fn("in_proj_w", in_proj_w);
    fn("in_proj_b", in_proj_b);
    for (size_t i = 0; i < layers.size(); ++i) {
      std::string p = "layer" + std::to_string(i + 1) + ".";
      EncoderLayerParams& L = layers[i];
      fn(p + "ln1_gain", L.ln1_gain);
      fn(p + "ln1_bias", L.ln1_bias);
      fn(p + "wq", L.wq);
      fn(p + "wk", L.wk);
      fn(p + "wv", L.wv);
      fn(p + "wo", L.wo);
      fn(p + "ln2_gain", L.ln2_gain);
      fn(p + "ln2_bias", L.ln2_bias);
      fn(p + "w1", L.w1);
      fn(p + "b1", L.b1);
      fn(p + "w2", L.w2);
      fn(p + "b2", L.b2);
    }
    fn("head_w", head_w);
    fn("head_b", head_b);
    fn("cond_w", cond_w);
    fn("cond_b", cond_b);
  }

  template <typename Fn>
  void visit_params(Fn&& fn) const {
    const_cast<EncoderModel*>(this)->visit_params(
        [&](const std::string& name, Matrix& m) { fn(name, static_cast<const Matrix&>(m)); });
  }
};

/// Final and intermediate posteriors (pre-hook) of one forward pass.
struct ForwardTrace {
  PosteriorGrid final_grid;
  std::map<int, PosteriorGrid> intermediate;       // keys exactly cond_layers
  std::map<int, LabelSequence> intermediate_greedy;
};

namespace detail {

// Node ids of interest in a taped forward pass.
struct TapedForward {
  int final_probs = -1;
  std::map<int, int> intermediate_probs;
  std::map<int, int> param_nodes;  // name → node id (only when training)
};

// Runs the encoder on the tape. When `params_out` is non-null every parameter
// is registered as a tape input and recorded there so gradients can be read
// back after backward().
inline TapedForward tape_forward(Tape& tape, const EncoderModel& model,
                                 const FeatureSequence& feats, const GridHook& hook,
                                 std::map<std::string, int>* params_out) {
  if (feats.cols() != model.input_dim)
    throw std::invalid_argument("forward: input dim mismatch");
  if (!feats.all_finite()) throw std::invalid_argument("forward: non-finite input");

  std::map<std::string, int> params;
  model.visit_params(
      [&](const std::string& name, const Matrix& m) { params[name] = tape.input(m); });
  auto P = [&](const std::string& name) { return params.at(name); };

  TapedForward out;
  int x = tape.input(feats);
  x = tape.add_row_broadcast(tape.matmul(x, P("in_proj_w")), P("in_proj_b"));

  double att_scale = 1.0 / std::sqrt(static_cast<double>(model.dim));
  for (int n = 1; n <= model.num_layers; ++n) {
    std::string p = "layer" + std::to_string(n) + ".";
    int h = tape.layer_norm(x, P(p + "ln1_gain"), P(p + "ln1_bias"));
    int q = tape.matmul(h, P(p + "wq"));
    int k = tape.matmul(h, P(p + "wk"));
    int v = tape.matmul(h, P(p + "wv"));
    int scores = tape.scale(tape.matmul_nt(q, k), att_scale);
    int att = tape.matmul(tape.matmul(tape.row_softmax(scores), v), P(p + "wo"));
    x = tape.add(x, att);

    int h2 = tape.layer_norm(x, P(p + "ln2_gain"), P(p + "ln2_bias"));
    int f = tape.add_row_broadcast(tape.matmul(h2, P(p + "w1")), P(p + "b1"));
    f = tape.add_row_broadcast(tape.matmul(tape.relu(f), P(p + "w2")), P(p + "b2"));
    x = tape.add(x, f);  // X^{(n)}

    if (model.conditions_layer(n)) {
      int logits = tape.add_row_broadcast(tape.matmul(x, P("head_w")), P("head_b"));
      int z = tape.row_softmax(logits);  // Z^{(n)}
      out.intermediate_probs[n] = z;
      int z_in = z;
      if (hook) {
        std::optional<PosteriorGrid> rewritten =
            hook(n, PosteriorGrid(tape.value(z)));
        if (rewritten.has_value()) z_in = tape.input(rewritten->probs);
      }
      int c = tape.add_row_broadcast(tape.matmul(z_in, P("cond_w")), P("cond_b"));
      x = tape.add(x, c);  // X'^{(n)}
    }
  }
  int logits = tape.add_row_broadcast(tape.matmul(x, P("head_w")), P("head_b"));
  out.final_probs = tape.row_softmax(logits);
  if (params_out) *params_out = std::move(params);
  return out;
}

}  // namespace detail

/// Forward pass; the hook (if any) may rewrite each intermediate posterior
/// before it is fed back as conditioning.
inline ForwardTrace forward(const EncoderModel& model, const FeatureSequence& feats,
                            const GridHook& hook = {}) {
  Tape tape;
  detail::TapedForward tf = detail::tape_forward(tape, model, feats, hook, nullptr);
  ForwardTrace trace;
  trace.final_grid = PosteriorGrid(tape.value(tf.final_probs));
  for (const auto& [layer, node] : tf.intermediate_probs) {
    trace.intermediate.emplace(layer, PosteriorGrid(tape.value(node)));
    trace.intermediate_greedy.emplace(layer,
                                      greedy_decode(trace.intermediate.at(layer)));
  }
  return trace;
}

/// Greedy intermediate predictions from layers n ≥ min_layer.
inline std::map<int, LabelSequence> intermediate_predictions(const ForwardTrace& trace,
                                                             int min_layer) {
  std::map<int, LabelSequence> out;
  for (const auto& [layer, seq] : trace.intermediate_greedy)
    if (layer >= min_layer) out.emplace(layer, seq);
  return out;
}

struct TrainConfig {
  double lambda = 0.5;  // mixing weight, strictly inside (0,1)
  double learning_rate = 0.05;
  // Heavy-ball momentum. Plain fixed-rate descent turned out to have no
  // usable learning-rate window on this objective (divergence above, crawl
  // below); momentum 0 recovers it.
  double momentum = 0.9;
  int epochs = 10;
  int batch_size = 16;
  uint64_t seed = 1;
};

struct Sample {
  FeatureSequence feats;
  LabelSequence target;
};

struct TrainLog {
  std::vector<double> epoch_loss;  // mean mixed loss over usable samples
  int skipped = 0;                 // samples with no feasible alignment
};

/// Mini-batch gradient descent on the mixed CTC objective. Deterministic per
/// (model init, corpus order, cfg.seed).
inline TrainLog train(EncoderModel& model, const std::vector<Sample>& corpus,
                      const TrainConfig& cfg) {
  if (cfg.lambda <= 0.0 || cfg.lambda >= 1.0)
    throw std::invalid_argument("train: lambda must lie strictly inside (0,1)");
  if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
  if (cfg.batch_size < 1 || cfg.epochs < 1)
    throw std::invalid_argument("train: bad epochs/batch_size");

  const bool has_intermediate = !model.cond_layers.empty();
  const double w_final = has_intermediate ? 1.0 - cfg.lambda : 1.0;
  const double w_inter =
      has_intermediate ? cfg.lambda / static_cast<double>(model.cond_layers.size()) : 0.0;

  SplitMix64 root(cfg.seed);
  TrainLog log;

  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  std::map<std::string, Matrix> grad_acc, velocity;
  model.visit_params([&](const std::string& name, Matrix& m) {
    grad_acc.emplace(name, Matrix(m.rows(), m.cols()));
    velocity.emplace(name, Matrix(m.rows(), m.cols()));
  });

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    SplitMix64 shuffle = root.stream("shuffle/" + std::to_string(epoch));
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(shuffle.next_int(0, static_cast<int>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    int epoch_used = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      size_t stop = std::min(order.size(), start + cfg.batch_size);
      for (auto& [name, g] : grad_acc) g.fill(0.0);
      int used = 0;

      for (size_t idx = start; idx < stop; ++idx) {
        const Sample& sample = corpus[order[idx]];
        Tape tape;
        std::map<std::string, int> param_nodes;
        detail::TapedForward tf =
            detail::tape_forward(tape, model, sample.feats, {}, &param_nodes);

        PosteriorGrid final_grid(tape.value(tf.final_probs));
        auto final_grad = ctc_loss_grad(final_grid, sample.target);
        if (!final_grad.has_value()) {
          ++log.skipped;
          continue;
        }
        double loss = w_final * *ctc_loss(final_grid, sample.target);
        Matrix g = *final_grad;
        for (double& v : g.data()) v *= w_final;
        tape.add_grad(tf.final_probs, g);

        for (const auto& [layer, node] : tf.intermediate_probs) {
          PosteriorGrid zi(tape.value(node));
          auto gi = ctc_loss_grad(zi, sample.target);
          if (!gi.has_value()) continue;  // same feasibility as final; defensive
          loss += w_inter * *ctc_loss(zi, sample.target);
          Matrix gm = *gi;
          for (double& v : gm.data()) v *= w_inter;
          tape.add_grad(node, gm);
        }

        if (!std::isfinite(loss))
          throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
        tape.backward();
        for (auto& [name, acc] : grad_acc)
          axpy(1.0, tape.grad(param_nodes.at(name)), acc);
        epoch_loss += loss;
        ++used;
      }

      if (used == 0) continue;
      model.visit_params([&](const std::string& name, Matrix& m) {
        const Matrix& g = grad_acc.at(name);
        if (!g.all_finite())
          throw NumericError("train: non-finite gradient in " + name);
        Matrix& v = velocity.at(name);
        for (size_t i = 0; i < v.size(); ++i)
          v.data()[i] = cfg.momentum * v.data()[i] + g.data()[i] / used;
        axpy(-cfg.learning_rate, v, m);
      });
      epoch_used += used;
    }
    log.epoch_loss.push_back(epoch_used > 0 ? epoch_loss / epoch_used
                                            : std::numeric_limits<double>::quiet_NaN());
  }
  return log;
}

}  // namespace interbias

#endif  // INTERBIAS_ENCODER_HPP_
