// tests/encoder_test.cc

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

#include "interbias/encoder.hpp"

#include <cmath>

#include "gtest/gtest.h"

namespace interbias {
namespace {

Vocabulary small_vocab() { return Vocabulary::from_labels({"a", "b", "c"}); }

FeatureSequence random_feats(int T, int dim, uint64_t seed) {
  SplitMix64 rng = SplitMix64(seed).stream("feats");
  Matrix m(T, dim);
  for (double& v : m.data()) v = rng.next_normal();
  return m;
}

EncoderModel tiny_model(std::vector<int> cond_layers, uint64_t seed = 11) {
  return EncoderModel::init(/*num_layers=*/2, /*dim=*/8, /*input_dim=*/6,
                            /*hidden_dim=*/16, std::move(cond_layers), small_vocab(),
                            seed);
}

// Mixed objective and its parameter gradients for one sample, via the tape.
double mixed_loss_and_grads(EncoderModel& model, const Sample& s, double lambda,
                            std::map<std::string, Matrix>* grads) {
  Tape tape;
  std::map<std::string, int> param_nodes;
  detail::TapedForward tf = detail::tape_forward(tape, model, s.feats, {}, &param_nodes);
  double w_final = model.cond_layers.empty() ? 1.0 : 1.0 - lambda;
  double w_inter = model.cond_layers.empty()
                       ? 0.0
                       : lambda / static_cast<double>(model.cond_layers.size());

  PosteriorGrid final_grid(tape.value(tf.final_probs));
  double loss = w_final * *ctc_loss(final_grid, s.target);
  Matrix g = *ctc_loss_grad(final_grid, s.target);
  for (double& v : g.data()) v *= w_final;
  tape.add_grad(tf.final_probs, g);
  for (const auto& [layer, node] : tf.intermediate_probs) {
    PosteriorGrid zi(tape.value(node));
    loss += w_inter * *ctc_loss(zi, s.target);
    Matrix gi = *ctc_loss_grad(zi, s.target);
    for (double& v : gi.data()) v *= w_inter;
    tape.add_grad(node, gi);
  }
  if (grads) {
    tape.backward();
    grads->clear();
    for (const auto& [name, node] : param_nodes) grads->emplace(name, tape.grad(node));
  }
  return loss;
}

TEST(EncoderForward, DeterministicAndRowStochastic) {
  EncoderModel model = tiny_model({1});
  FeatureSequence feats = random_feats(7, 6, 3);
  ForwardTrace a = forward(model, feats);
  ForwardTrace b = forward(model, feats);
  EXPECT_EQ(a.final_grid, b.final_grid);
  EXPECT_EQ(a.intermediate, b.intermediate);
  EXPECT_TRUE(a.final_grid.is_row_stochastic(1e-6));
  ASSERT_EQ(a.intermediate.size(), 1u);
  EXPECT_TRUE(a.intermediate.at(1).is_row_stochastic(1e-6));
  EXPECT_EQ(a.intermediate_greedy.at(1), greedy_decode(a.intermediate.at(1)));
}

TEST(EncoderForward, NoCondLayersMeansPlainStack) {
  // With an empty conditioning set the trace has no intermediate grids and
  // the hook is never consulted.
  EncoderModel model = tiny_model({});
  FeatureSequence feats = random_feats(5, 6, 4);
  int hook_calls = 0;
  GridHook hook = [&](int, const PosteriorGrid&) -> std::optional<PosteriorGrid> {
    ++hook_calls;
    return std::nullopt;
  };
  ForwardTrace t = forward(model, feats, hook);
  EXPECT_TRUE(t.intermediate.empty());
  EXPECT_EQ(hook_calls, 0);
}

TEST(EncoderForward, IdentityHookBitIdenticalToAbsentHook) {
  EncoderModel model = tiny_model({1});
  FeatureSequence feats = random_feats(6, 6, 5);
  GridHook identity = [](int, const PosteriorGrid&) -> std::optional<PosteriorGrid> {
    return std::nullopt;
  };
  ForwardTrace a = forward(model, feats);
  ForwardTrace b = forward(model, feats, identity);
  EXPECT_EQ(a.final_grid, b.final_grid);
  EXPECT_EQ(a.intermediate, b.intermediate);
  EXPECT_EQ(a.intermediate_greedy, b.intermediate_greedy);
}

TEST(EncoderForward, HookRewriteChangesConditioning) {
  EncoderModel model = tiny_model({1});
  FeatureSequence feats = random_feats(6, 6, 6);
  // Rewrite to a uniform grid; downstream output must differ from plain run.
  GridHook uniform = [](int, const PosteriorGrid& g) -> std::optional<PosteriorGrid> {
    Matrix m(g.num_frames(), g.vocab_size(), 1.0 / g.vocab_size());
    return PosteriorGrid(m);
  };
  ForwardTrace plain = forward(model, feats);
  ForwardTrace biased = forward(model, feats, uniform);
  EXPECT_EQ(plain.intermediate, biased.intermediate);  // pre-hook grids equal
  EXPECT_NE(plain.final_grid, biased.final_grid);
}

TEST(EncoderForward, InputDimMismatchThrows) {
  EncoderModel model = tiny_model({1});
  EXPECT_THROW(forward(model, random_feats(4, 5, 7)), std::invalid_argument);
}

TEST(IntermediatePredictions, FiltersByLayer) {
  EncoderModel model = EncoderModel::init(4, 8, 6, 16, {1, 2, 3}, small_vocab(), 2);
  FeatureSequence feats = random_feats(6, 6, 8);
  ForwardTrace t = forward(model, feats);
  EXPECT_EQ(intermediate_predictions(t, 1).size(), 3u);
  auto top = intermediate_predictions(t, 3);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top.begin()->first, 3);
}

TEST(EncoderGrad, FullModelMatchesFiniteDifferences) {
  EncoderModel model = tiny_model({1});
  Sample s{random_feats(5, 6, 9), LabelSequence{0, 1}};
  const double lambda = 0.5;

  std::map<std::string, Matrix> grads;
  mixed_loss_and_grads(model, s, lambda, &grads);

  const double h = 1e-5;
  int checked = 0;
  SplitMix64 pick(17);
  model.visit_params([&](const std::string& name, Matrix& m) {
    // Probe a subset of elements per tensor to keep the test quick.
    for (int probe = 0; probe < 3; ++probe) {
      int idx = pick.next_int(0, static_cast<int>(m.size()) - 1);
      double saved = m.data()[idx];
      m.data()[idx] = saved + h;
      double up = mixed_loss_and_grads(model, s, lambda, nullptr);
      m.data()[idx] = saved - h;
      double down = mixed_loss_and_grads(model, s, lambda, nullptr);
      m.data()[idx] = saved;
      double fd = (up - down) / (2 * h);
      double an = grads.at(name).data()[idx];
      EXPECT_NEAR(an, fd, 1e-3 * std::max(1.0, std::abs(fd)))
          << name << "[" << idx << "]";
      ++checked;
    }
  });
  EXPECT_GT(checked, 50);
}

TEST(Train, SingleSampleOverfit) {
  EncoderModel model = tiny_model({1});
  SplitMix64 rng(21);
  // 12 frames, 4-label target; features random but fixed.
  Sample s{random_feats(12, 6, 10), LabelSequence{0, 1, 2, 0}};
  TrainConfig cfg;
  cfg.lambda = 0.5;
  cfg.learning_rate = 0.05;
  cfg.epochs = 200;
  cfg.batch_size = 1;
  cfg.seed = 5;
  TrainLog log = train(model, {s}, cfg);
  ForwardTrace t = forward(model, s.feats);
  auto loss = ctc_loss(t.final_grid, s.target);
  ASSERT_TRUE(loss.has_value());
  EXPECT_LT(*loss, 0.1) << "final mixed loss " << log.epoch_loss.back();
}

TEST(Train, DeterministicPerSeed) {
  auto run = [] {
    EncoderModel model = tiny_model({1});
    std::vector<Sample> corpus;
    for (int i = 0; i < 4; ++i)
      corpus.push_back({random_feats(8, 6, 100 + i), LabelSequence{i % 3, (i + 1) % 3}});
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 3;
    cfg.batch_size = 2;
    cfg.seed = 7;
    train(model, corpus, cfg);
    return model;
  };
  EncoderModel a = run();
  EncoderModel b = run();
  bool equal = true;
  a.visit_params([&](const std::string& name, const Matrix& m) {
    b.visit_params([&](const std::string& name2, const Matrix& m2) {
      if (name == name2 && !(m == m2)) equal = false;
    });
  });
  EXPECT_TRUE(equal);
}

TEST(Train, EmptyCondSetTrainsPlainCtc) {
  EncoderModel model = tiny_model({});
  std::vector<Sample> corpus{{random_feats(10, 6, 42), LabelSequence{0, 1}}};
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 50;
  cfg.batch_size = 1;
  TrainLog log = train(model, corpus, cfg);
  EXPECT_LT(log.epoch_loss.back(), log.epoch_loss.front());
}

TEST(Train, SkipsInfeasibleSamples) {
  EncoderModel model = tiny_model({1});
  std::vector<Sample> corpus{
      {random_feats(1, 6, 1), LabelSequence{0, 1, 2}},  // T too short
      {random_feats(8, 6, 2), LabelSequence{0, 1}},
  };
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  TrainLog log = train(model, corpus, cfg);
  EXPECT_EQ(log.skipped, 2);  // once per epoch
  EXPECT_TRUE(std::isfinite(log.epoch_loss.back()));
}

TEST(Train, RejectsBadLambda) {
  EncoderModel model = tiny_model({1});
  std::vector<Sample> corpus{{random_feats(8, 6, 3), LabelSequence{0}}};
  TrainConfig cfg;
  cfg.lambda = 1.0;
  EXPECT_THROW(train(model, corpus, cfg), std::invalid_argument);
}

}  // namespace
}  // namespace interbias
