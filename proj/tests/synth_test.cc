// tests/synth_test.cc

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

#include "interbias/synth.hpp"

#include <set>

#include "gtest/gtest.h"

namespace interbias {
namespace {

TEST(Synthesize, NoiselessSingleFrameRecoversTextByNearestPrototype) {
  Vocabulary v = default_vocabulary();
  SynthConfig cfg;
  cfg.noise_std = 0.0;
  cfg.frames_min = 1;
  cfg.frames_max = 1;
  cfg.seed = 3;
  Matrix protos = make_prototypes(v, cfg);
  SplitMix64 rng = SplitMix64(cfg.seed).stream("t");
  std::string text = "hello_world";
  FeatureSequence f = synthesize(text, v, protos, cfg, rng);
  ASSERT_EQ(f.rows(), static_cast<int>(text.size()));
  for (int t = 0; t < f.rows(); ++t) {
    int best = -1;
    double best_d = 1e300;
    for (int k = 0; k < v.size(); ++k) {
      double d = 0.0;
      for (int c = 0; c < cfg.feature_dim; ++c) {
        double diff = f(t, c) - protos(k, c);
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    EXPECT_EQ(v.token(best), std::string(1, text[static_cast<size_t>(t)]));
  }
}

TEST(Synthesize, DeterministicPerSeedAndText) {
  Vocabulary v = default_vocabulary();
  SynthConfig cfg;
  cfg.seed = 9;
  Matrix protos = make_prototypes(v, cfg);
  SplitMix64 a = SplitMix64(cfg.seed).stream("x");
  SplitMix64 b = SplitMix64(cfg.seed).stream("x");
  EXPECT_EQ(synthesize("abc_def", v, protos, cfg, a),
            synthesize("abc_def", v, protos, cfg, b));
}

TEST(Synthesize, RejectsOutOfVocabularyText) {
  Vocabulary v = default_vocabulary();
  SynthConfig cfg;
  Matrix protos = make_prototypes(v, cfg);
  SplitMix64 rng(1);
  EXPECT_THROW(synthesize("ab9", v, protos, cfg, rng), DataError);
}

TEST(MakeWordLists, DisjointAndDeterministic) {
  std::vector<std::string> lex_a, oov_a, lex_b, oov_b;
  make_word_lists(77, 50, 10, 3, 7, &lex_a, &oov_a);
  make_word_lists(77, 50, 10, 3, 7, &lex_b, &oov_b);
  EXPECT_EQ(lex_a, lex_b);
  EXPECT_EQ(oov_a, oov_b);
  std::set<std::string> lex_set(lex_a.begin(), lex_a.end());
  EXPECT_EQ(lex_set.size(), 50u);
  for (const std::string& w : oov_a) EXPECT_EQ(lex_set.count(w), 0u);
  // No adjacent repeated characters: every sample stays alignable.
  for (const std::string& w : lex_a)
    for (size_t i = 1; i < w.size(); ++i) EXPECT_NE(w[i], w[i - 1]);
}

TEST(MakeCorpus, OovNeverInTrainAndOccurrencesRespected) {
  SynthConfig cfg;
  cfg.seed = 21;
  std::vector<std::string> lexicon, oov;
  make_word_lists(cfg.seed, 40, 5, 3, 6, &lexicon, &oov);
  CorpusSizes sizes;
  sizes.train = 60;
  sizes.dev = 10;
  sizes.keyword_occurrences = 4;
  sizes.test_fillers = 6;
  sizes.nonoov_train_occurrences = 2;
  CorpusBundle bundle = make_corpus(cfg, lexicon, oov, /*nonoov=*/3, sizes);

  ASSERT_EQ(bundle.keywords.size(), 8u);  // 5 OOV + 3 non-OOV
  int oov_count = 0;
  for (const KeywordMeta& km : bundle.keywords) oov_count += km.oov;
  EXPECT_EQ(oov_count, 5);

  auto contains_word = [](const std::string& text, const std::string& w) {
    std::string padded = "_" + text + "_";
    return padded.find("_" + w + "_") != std::string::npos;
  };
  for (const Utterance& u : bundle.train)
    for (const KeywordMeta& km : bundle.keywords)
      if (km.oov) EXPECT_FALSE(contains_word(u.text, km.keyword)) << u.text;

  for (const KeywordMeta& km : bundle.keywords) {
    int in_test = 0;
    for (const Utterance& u : bundle.test) in_test += contains_word(u.text, km.keyword);
    EXPECT_GE(in_test, sizes.keyword_occurrences) << km.keyword;
    if (!km.oov) {
      int in_train = 0;
      for (const Utterance& u : bundle.train)
        in_train += contains_word(u.text, km.keyword);
      EXPECT_GE(in_train, sizes.nonoov_train_occurrences) << km.keyword;
    }
  }
  EXPECT_EQ(bundle.test.size(),
            8 * sizes.keyword_occurrences + static_cast<size_t>(sizes.test_fillers));
}

TEST(MakeCorpus, RegenerationIsIdentical) {
  SynthConfig cfg;
  cfg.seed = 5;
  std::vector<std::string> lexicon, oov;
  make_word_lists(cfg.seed, 30, 4, 3, 6, &lexicon, &oov);
  CorpusSizes sizes;
  sizes.train = 20;
  sizes.dev = 5;
  sizes.keyword_occurrences = 2;
  sizes.test_fillers = 3;
  CorpusBundle a = make_corpus(cfg, lexicon, oov, 2, sizes);
  CorpusBundle b = make_corpus(cfg, lexicon, oov, 2, sizes);
  ASSERT_EQ(a.train.size(), b.train.size());
  for (size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].id, b.train[i].id);
    EXPECT_EQ(a.train[i].text, b.train[i].text);
    EXPECT_EQ(a.train[i].features, b.train[i].features);
  }
}

TEST(MakeCorpus, OovOverlapRejected) {
  SynthConfig cfg;
  std::vector<std::string> lexicon{"abc", "def"};
  std::vector<std::string> oov{"abc"};
  EXPECT_THROW(make_corpus(cfg, lexicon, oov, 0, CorpusSizes{}), DataError);
}

}  // namespace
}  // namespace interbias
