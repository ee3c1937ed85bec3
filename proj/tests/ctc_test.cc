// tests/ctc_test.cc

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

#include "interbias/ctc.hpp"

#include <cmath>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace interbias {
namespace {

Vocabulary abc_vocab() { return Vocabulary::from_labels({"a", "b"}); }

// Grid over {a, b, <blank>} from explicit rows.
PosteriorGrid grid3(const std::vector<std::vector<double>>& rows) {
  Matrix m(static_cast<int>(rows.size()), 3);
  for (size_t t = 0; t < rows.size(); ++t)
    for (int k = 0; k < 3; ++k) m(static_cast<int>(t), k) = rows[t][k];
  return PosteriorGrid(m);
}

TEST(Collapse, AllBlank) {
  Vocabulary v = abc_vocab();
  AlignmentPath path{2, 2, 2};
  EXPECT_EQ(collapse(path, v), LabelSequence{});
}

TEST(Collapse, RepeatsMergeBeforeBlankRemoval) {
  Vocabulary v = abc_vocab();
  // a a ε a b ε → a a b
  AlignmentPath path{0, 0, 2, 0, 1, 2};
  EXPECT_EQ(collapse(path, v), (LabelSequence{0, 0, 1}));
}

TEST(Collapse, BlankRunsSeparate) {
  Vocabulary v = abc_vocab();
  AlignmentPath path{0, 2, 2, 1, 1};
  EXPECT_EQ(collapse(path, v), (LabelSequence{0, 1}));
}

TEST(Collapse, OutOfRangeIdThrows) {
  Vocabulary v = abc_vocab();
  AlignmentPath path{0, 7};
  EXPECT_THROW(collapse(path, v), std::invalid_argument);
}

TEST(CtcLoss, SinglePath) {
  PosteriorGrid g = grid3({{0.7, 0.2, 0.1}});
  auto loss = ctc_loss(g, LabelSequence{0});
  ASSERT_TRUE(loss.has_value());
  EXPECT_NEAR(*loss, -std::log(0.7), 1e-9);
  EXPECT_NEAR(*loss, 0.356675, 1e-6);
}

TEST(CtcLoss, UniformTwoFrames) {
  double u = 1.0 / 3.0;
  PosteriorGrid g = grid3({{u, u, u}, {u, u, u}});
  // Valid paths for "a": aa, aε, εa → 3/9.
  auto loss = ctc_loss(g, LabelSequence{0});
  ASSERT_TRUE(loss.has_value());
  EXPECT_NEAR(*loss, std::log(3.0), 1e-9);
}

TEST(CtcLoss, InfeasibleTarget) {
  PosteriorGrid g = grid3({{0.7, 0.2, 0.1}});
  EXPECT_FALSE(ctc_loss(g, LabelSequence{0, 1}).has_value());
}

TEST(CtcLoss, RepeatNeedsSeparatingBlank) {
  PosteriorGrid g = grid3({{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}});
  EXPECT_FALSE(ctc_loss(g, LabelSequence{0, 0}).has_value());
  PosteriorGrid g3 = grid3({{0.5, 0.3, 0.2}, {0.2, 0.3, 0.5}, {0.5, 0.3, 0.2}});
  auto loss = ctc_loss(g3, LabelSequence{0, 0});
  ASSERT_TRUE(loss.has_value());
  // Only path is a ε a.
  EXPECT_NEAR(*loss, -std::log(0.5 * 0.5 * 0.5), 1e-9);
}

TEST(CtcLoss, MatchesBruteForceEnumeration) {
  SplitMix64 rng(2026);
  for (int trial = 0; trial < 200; ++trial) {
    int vp = rng.next_int(2, 4);  // |V'| including blank
    int T = rng.next_int(1, 6);
    PosteriorGrid g = oracle::random_grid(T, vp, rng);
    std::vector<int> target = oracle::random_target(rng.next_int(0, 3), vp, rng);
    auto loss = ctc_loss(g, LabelSequence(target));
    double total = oracle::total_prob(g, target);
    if (!loss.has_value()) {
      EXPECT_EQ(total, 0.0) << "trial " << trial;
      continue;
    }
    ASSERT_GT(total, 0.0) << "trial " << trial;
    EXPECT_NEAR(*loss, -std::log(total), 1e-9 * std::abs(std::log(total)) + 1e-12)
        << "trial " << trial;
  }
}

TEST(CtcLossGrad, SingleFrameClosedForm) {
  PosteriorGrid g = grid3({{0.7, 0.2, 0.1}});
  auto grad = ctc_loss_grad(g, LabelSequence{0});
  ASSERT_TRUE(grad.has_value());
  EXPECT_NEAR((*grad)(0, 0), -1.0 / 0.7, 1e-9);
  EXPECT_NEAR((*grad)(0, 0), -1.428571, 1e-6);
  EXPECT_DOUBLE_EQ((*grad)(0, 1), 0.0);
  EXPECT_DOUBLE_EQ((*grad)(0, 2), 0.0);
}

TEST(CtcLossGrad, UniformGridSymmetricAcrossFrames) {
  double u = 1.0 / 3.0;
  PosteriorGrid g = grid3({{u, u, u}, {u, u, u}});
  auto grad = ctc_loss_grad(g, LabelSequence{0});
  ASSERT_TRUE(grad.has_value());
  for (int k = 0; k < 3; ++k) EXPECT_NEAR((*grad)(0, k), (*grad)(1, k), 1e-12);
}

TEST(CtcLossGrad, InfeasibleTarget) {
  PosteriorGrid g = grid3({{0.7, 0.2, 0.1}});
  EXPECT_FALSE(ctc_loss_grad(g, LabelSequence{0, 1}).has_value());
}

TEST(CtcLossGrad, MatchesFiniteDifferences) {
  SplitMix64 rng(7);
  const double h = 1e-5;
  for (int trial = 0; trial < 25; ++trial) {
    int vp = 4;  // |V| = 3
    int T = 4;
    PosteriorGrid g = oracle::random_grid(T, vp, rng);
    std::vector<int> target = oracle::random_target(rng.next_int(1, 2), vp, rng);
    auto grad = ctc_loss_grad(g, LabelSequence(target));
    ASSERT_TRUE(grad.has_value());
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < vp; ++k) {
        PosteriorGrid gp = g, gm = g;
        gp.probs(t, k) += h;
        gm.probs(t, k) -= h;
        double fd = (*ctc_loss(gp, LabelSequence(target)) -
                     *ctc_loss(gm, LabelSequence(target))) /
                    (2 * h);
        double an = (*grad)(t, k);
        EXPECT_NEAR(an, fd, 1e-4 * std::max(1.0, std::abs(fd)))
            << "trial " << trial << " t=" << t << " k=" << k;
      }
    }
  }
}

TEST(GreedyDecode, CollapsesArgmaxes) {
  PosteriorGrid g = grid3({{0.8, 0.1, 0.1},
                           {0.6, 0.3, 0.1},
                           {0.1, 0.2, 0.7},
                           {0.2, 0.7, 0.1}});
  EXPECT_EQ(greedy_decode(g), (LabelSequence{0, 1}));
}

TEST(GreedyDecode, AllBlank) {
  PosteriorGrid g = grid3({{0.1, 0.2, 0.7}, {0.3, 0.2, 0.5}});
  EXPECT_EQ(greedy_decode(g), LabelSequence{});
}

TEST(GreedyDecode, BlankSplitsRepeat) {
  PosteriorGrid g = grid3({{0.8, 0.1, 0.1}, {0.1, 0.1, 0.8}, {0.8, 0.1, 0.1}});
  EXPECT_EQ(greedy_decode(g), (LabelSequence{0, 0}));
}

TEST(GreedyDecode, TieBreaksTowardLowestId) {
  PosteriorGrid g = grid3({{0.4, 0.4, 0.2}});
  EXPECT_EQ(greedy_decode(g), LabelSequence{0});
}

TEST(ViterbiAlign, PrefersBestPath) {
  PosteriorGrid g = grid3({{0.9, 0.05, 0.05}, {0.1, 0.1, 0.8}});
  auto path = viterbi_align(LabelSequence{0}, g);
  ASSERT_TRUE(path.has_value());
  EXPECT_EQ(*path, (AlignmentPath{0, 2}));
}

TEST(ViterbiAlign, EmptyTargetIsAllBlank) {
  PosteriorGrid g = grid3({{0.9, 0.05, 0.05}, {0.1, 0.1, 0.8}, {0.3, 0.3, 0.4}});
  auto path = viterbi_align(LabelSequence{}, g);
  ASSERT_TRUE(path.has_value());
  EXPECT_EQ(*path, (AlignmentPath{2, 2, 2}));
}

TEST(ViterbiAlign, RepeatForcesBlankBetween) {
  PosteriorGrid g = grid3({{0.5, 0.3, 0.2}, {0.4, 0.3, 0.3}, {0.5, 0.3, 0.2}});
  auto path = viterbi_align(LabelSequence{0, 0}, g);
  ASSERT_TRUE(path.has_value());
  EXPECT_EQ(*path, (AlignmentPath{0, 2, 0}));
}

TEST(ViterbiAlign, InfeasibleDistinctFromInvalid) {
  PosteriorGrid g = grid3({{0.5, 0.3, 0.2}});
  EXPECT_FALSE(viterbi_align(LabelSequence{0, 1}, g).has_value());
  EXPECT_THROW(viterbi_align(LabelSequence{9}, g), std::invalid_argument);
}

TEST(ViterbiAlign, MatchesBruteForceArgmax) {
  SplitMix64 rng(99);
  int solved = 0;
  for (int trial = 0; trial < 120; ++trial) {
    int vp = rng.next_int(2, 4);
    int T = rng.next_int(1, 6);
    PosteriorGrid g = oracle::random_grid(T, vp, rng);
    std::vector<int> target = oracle::random_target(rng.next_int(0, 3), vp, rng);
    auto path = viterbi_align(LabelSequence(target), g);
    auto [bf_path, bf_prob] = oracle::best_path(g, target);
    if (!path.has_value()) {
      EXPECT_LT(bf_prob, 0.0) << "trial " << trial;
      continue;
    }
    ++solved;
    // Collapsing back must reproduce the target exactly.
    Vocabulary v = vp == 2 ? Vocabulary::from_labels({"a"})
                           : (vp == 3 ? Vocabulary::from_labels({"a", "b"})
                                      : Vocabulary::from_labels({"a", "b", "c"}));
    EXPECT_EQ(collapse(*path, v), LabelSequence(target)) << "trial " << trial;
    double p = oracle::path_prob(g, path->ids);
    EXPECT_NEAR(p, bf_prob, 1e-12 + 1e-9 * bf_prob) << "trial " << trial;
  }
  EXPECT_GT(solved, 50);
}

TEST(MinFrames, CountsRepeats) {
  EXPECT_EQ(min_frames_required(LabelSequence{}), 0);
  EXPECT_EQ(min_frames_required(LabelSequence{0, 1}), 2);
  EXPECT_EQ(min_frames_required(LabelSequence{0, 0}), 3);
  EXPECT_EQ(min_frames_required(LabelSequence{0, 0, 0}), 5);
}

}  // namespace
}  // namespace interbias
