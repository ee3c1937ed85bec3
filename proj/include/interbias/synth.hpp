// interbias/synth.hpp

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

// Deterministic synthetic "audio": every character owns a fixed prototype
// vector; a character emits 1..k noisy copies of its prototype. The same
// generator stands in for the corpus recordings and for keyword synthesis
// during trigger harvesting. Everything is a pure function of (config, seed,
// utterance id).

#ifndef INTERBIAS_SYNTH_HPP_
#define INTERBIAS_SYNTH_HPP_

#include <set>
#include <string>
#include <vector>

#include "interbias/errors.hpp"
#include "interbias/matrix.hpp"
#include "interbias/rng.hpp"
#include "interbias/vocab.hpp"

namespace interbias {

inline constexpr const char* kDelimiterToken = "_";

/// Default synthetic alphabet: 26 letters plus the word delimiter.
inline Vocabulary default_vocabulary() {
  std::vector<std::string> labels;
  for (char c = 'a'; c <= 'z'; ++c) labels.emplace_back(1, c);
  labels.emplace_back(kDelimiterToken);
  return Vocabulary::from_labels(labels);
}

struct SynthConfig {
  int feature_dim = 16;
  int frames_min = 1;
  int frames_max = 3;
  double noise_std = 0.5;
  // Prototypes are unit vectors scaled by proto_scale. Smaller scale means
  // more confusable characters relative to the noise.
  double proto_scale = 1.0;
  uint64_t seed = 1;

  void validate() const {
    if (feature_dim < 1) throw std::invalid_argument("synth: feature_dim < 1");
    if (frames_min < 1 || frames_max < frames_min)
      throw std::invalid_argument("synth: bad frames_per_char range");
    if (noise_std < 0.0) throw std::invalid_argument("synth: negative noise_std");
  }
};

/// |V'| × feature_dim prototype rows, fixed by (seed, feature_dim). The blank
/// row exists for layout parity but no text ever emits it.
inline Matrix make_prototypes(const Vocabulary& vocab, const SynthConfig& cfg) {
  cfg.validate();
  SplitMix64 rng = SplitMix64(cfg.seed).stream("prototypes");
  Matrix protos(vocab.size(), cfg.feature_dim);
  for (int r = 0; r < protos.rows(); ++r) {
    double norm2 = 0.0;
    for (int c = 0; c < cfg.feature_dim; ++c) {
      protos(r, c) = rng.next_normal();
      norm2 += protos(r, c) * protos(r, c);
    }
    double inv = cfg.proto_scale / std::sqrt(norm2);
    for (int c = 0; c < cfg.feature_dim; ++c) protos(r, c) *= inv;
  }
  return protos;
}

/// Renders a text as noisy prototype frames. The caller owns the RNG stream:
/// the same (text, stream) pair always produces the same features.
inline FeatureSequence synthesize(const std::string& text, const Vocabulary& vocab,
                                  const Matrix& prototypes, const SynthConfig& cfg,
                                  SplitMix64& rng) {
  cfg.validate();
  auto ids = encode_text(vocab, text);
  if (!ids.has_value())
    throw DataError("synth: text contains out-of-vocabulary characters: " + text);
  if (ids->empty()) throw DataError("synth: empty text");

  std::vector<int> durations(ids->ids.size());
  int total = 0;
  for (size_t i = 0; i < durations.size(); ++i) {
    durations[i] = rng.next_int(cfg.frames_min, cfg.frames_max);
    total += durations[i];
  }
  Matrix feats(total, cfg.feature_dim);
  int t = 0;
  for (size_t i = 0; i < durations.size(); ++i) {
    const double* proto = prototypes.row(ids->ids[i]);
    for (int d = 0; d < durations[i]; ++d, ++t) {
      double* row = feats.row(t);
      for (int c = 0; c < cfg.feature_dim; ++c)
        row[c] = proto[c] + cfg.noise_std * rng.next_normal();
    }
  }
  return feats;
}

struct Utterance {
  std::string id;
  std::string text;
  FeatureSequence features;
};

struct KeywordMeta {
  std::string keyword;
  bool oov = false;
};

struct CorpusBundle {
  Vocabulary vocab;
  Matrix prototypes;
  std::vector<Utterance> train, dev, test;
  std::vector<KeywordMeta> keywords;
};

struct CorpusSizes {
  int train = 1500;
  int dev = 150;
  int keyword_occurrences = 10;  // test utterances embedding each keyword
  int test_fillers = 40;         // keyword-free test utterances
  int nonoov_train_occurrences = 2;
  int sent_words_min = 3;
  int sent_words_max = 6;
};

namespace detail {

inline std::string make_utt_id(const std::string& split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%05d", split.c_str(), index);
  return buf;
}

// Zipf-ish weights: rank r gets 1/(r+4); heavy head, long usable tail.
inline int sample_word_index(SplitMix64& rng, int count) {
  double total = 0.0;
  for (int r = 0; r < count; ++r) total += 1.0 / (r + 4.0);
  double u = rng.next_double() * total;
  for (int r = 0; r < count; ++r) {
    u -= 1.0 / (r + 4.0);
    if (u <= 0.0) return r;
  }
  return count - 1;
}

}  // namespace detail

/// Builds train/dev/test splits. The OOV keyword set must be disjoint from
/// the lexicon (checked). Non-OOV keywords are the rarest lexicon words: they
/// are excluded from carrier sampling and planted in a fixed small number of
/// train utterances, so they stay in-vocabulary but rare. Test utterances
/// embed each keyword `keyword_occurrences` times inside carrier sentences.
inline CorpusBundle make_corpus(const SynthConfig& cfg,
                                const std::vector<std::string>& lexicon,
                                const std::vector<std::string>& oov_keywords,
                                int nonoov_keyword_count, const CorpusSizes& sizes) {
  cfg.validate();
  if (lexicon.empty()) throw DataError("corpus: empty lexicon");
  if (nonoov_keyword_count < 0 ||
      nonoov_keyword_count >= static_cast<int>(lexicon.size()))
    throw DataError("corpus: bad non-OOV keyword count");

  std::set<std::string> lex_set(lexicon.begin(), lexicon.end());
  if (lex_set.size() != lexicon.size()) throw DataError("corpus: duplicate lexicon word");
  for (const std::string& kw : oov_keywords)
    if (lex_set.count(kw))
      throw DataError("corpus: OOV keyword '" + kw + "' appears in the lexicon");

  CorpusBundle bundle;
  bundle.vocab = default_vocabulary();
  bundle.prototypes = make_prototypes(bundle.vocab, cfg);

  // Carrier words = lexicon minus the non-OOV keyword tail.
  int carrier_count = static_cast<int>(lexicon.size()) - nonoov_keyword_count;
  std::vector<std::string> carriers(lexicon.begin(), lexicon.begin() + carrier_count);
  std::vector<std::string> nonoov(lexicon.begin() + carrier_count, lexicon.end());

  for (const std::string& kw : oov_keywords) bundle.keywords.push_back({kw, true});
  for (const std::string& kw : nonoov) bundle.keywords.push_back({kw, false});

  SplitMix64 root(cfg.seed);
  SplitMix64 text_rng = root.stream("corpus-text");

  auto carrier_sentence = [&](int words) {
    std::string text;
    for (int w = 0; w < words; ++w) {
      if (w) text += kDelimiterToken;
      text += carriers[detail::sample_word_index(text_rng, carrier_count)];
    }
    return text;
  };
  auto sentence_with = [&](const std::string& kw) {
    int words = text_rng.next_int(sizes.sent_words_min, sizes.sent_words_max);
    int slot = text_rng.next_int(0, words - 1);
    std::string text;
    for (int w = 0; w < words; ++w) {
      if (w) text += kDelimiterToken;
      text += (w == slot) ? kw
                          : carriers[detail::sample_word_index(text_rng, carrier_count)];
    }
    return text;
  };

  std::vector<std::pair<std::string, std::string>> train_texts;  // id, text
  for (int i = 0; i < sizes.train; ++i) {
    int words = text_rng.next_int(sizes.sent_words_min, sizes.sent_words_max);
    train_texts.emplace_back(detail::make_utt_id("train", i), carrier_sentence(words));
  }
  // Plant each non-OOV keyword into a few train sentences, replacing the
  // sentence entirely so corpus size stays fixed.
  int plant = 0;
  for (const std::string& kw : nonoov) {
    for (int r = 0; r < sizes.nonoov_train_occurrences; ++r, ++plant) {
      if (plant >= sizes.train)
        throw DataError("corpus: train too small to plant non-OOV keywords");
      train_texts[plant].second = sentence_with(kw);
    }
  }

  std::vector<std::pair<std::string, std::string>> dev_texts;
  for (int i = 0; i < sizes.dev; ++i) {
    int words = text_rng.next_int(sizes.sent_words_min, sizes.sent_words_max);
    dev_texts.emplace_back(detail::make_utt_id("dev", i), carrier_sentence(words));
  }

  std::vector<std::pair<std::string, std::string>> test_texts;
  int test_index = 0;
  for (const KeywordMeta& km : bundle.keywords)
    for (int r = 0; r < sizes.keyword_occurrences; ++r)
      test_texts.emplace_back(detail::make_utt_id("test", test_index++),
                              sentence_with(km.keyword));
  for (int i = 0; i < sizes.test_fillers; ++i) {
    int words = text_rng.next_int(sizes.sent_words_min, sizes.sent_words_max);
    test_texts.emplace_back(detail::make_utt_id("test", test_index++),
                            carrier_sentence(words));
  }

  auto render = [&](const std::vector<std::pair<std::string, std::string>>& texts,
                    std::vector<Utterance>& out) {
    for (const auto& [id, text] : texts) {
      SplitMix64 rng = root.stream("features/" + id);
      out.push_back({id, text, synthesize(text, bundle.vocab, bundle.prototypes, cfg, rng)});
    }
  };
  render(train_texts, bundle.train);
  render(dev_texts, bundle.dev);
  render(test_texts, bundle.test);
  return bundle;
}

/// Random word without adjacent repeated characters (keeps every sample
/// alignable even at one frame per character).
inline std::string random_word(SplitMix64& rng, int len_min, int len_max) {
  int len = rng.next_int(len_min, len_max);
  std::string w;
  int prev = -1;
  for (int i = 0; i < len; ++i) {
    int c;
    do {
      c = rng.next_int(0, 25);
    } while (c == prev);
    w += static_cast<char>('a' + c);
    prev = c;
  }
  return w;
}

/// Disjoint lexicon + OOV keyword lists, deterministic per seed.
inline void make_word_lists(uint64_t seed, int lexicon_size, int oov_count,
                            int word_min, int word_max,
                            std::vector<std::string>* lexicon,
                            std::vector<std::string>* oov_keywords) {
  SplitMix64 rng = SplitMix64(seed).stream("lexicon");
  std::set<std::string> seen;
  lexicon->clear();
  oov_keywords->clear();
  while (static_cast<int>(lexicon->size()) < lexicon_size) {
    std::string w = random_word(rng, word_min, word_max);
    if (seen.insert(w).second) lexicon->push_back(w);
  }
  while (static_cast<int>(oov_keywords->size()) < oov_count) {
    std::string w = random_word(rng, word_min, word_max);
    if (seen.insert(w).second) oov_keywords->push_back(w);
  }
}

}  // namespace interbias

#endif  // INTERBIAS_SYNTH_HPP_
