// interbias/decoding.hpp

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

// CTC prefix beam search. Prefixes are merged on their collapsed token
// sequence with separate blank / non-blank log masses. Ranking adds the LM
// score (shallow fusion), a per-token length reward and the keyword bonus.
//
// Keyword boosting is word-aware trie matching: matching starts at each word
// boundary, every token that advances the trie earns a provisional
// kbbs_weight, falling off the trie retracts the provisional bonus, and the
// bonus is locked in only when the word ends exactly at a keyword terminal.
// Hypotheses whose final word is a partial match keep no net bonus.

#ifndef INTERBIAS_DECODING_HPP_
#define INTERBIAS_DECODING_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "interbias/biasing.hpp"
#include "interbias/ctc.hpp"
#include "interbias/errors.hpp"
#include "interbias/lm.hpp"
#include "interbias/vocab.hpp"

namespace interbias {

struct DecodeConfig {
  int beam_size = 10;
  double lm_weight = 0.5;
  double length_penalty = 0.2;  // reward per emitted token
  double kbbs_weight = 0.0;     // 0 disables keyword boosting

  void validate() const {
    if (beam_size < 1) throw std::invalid_argument("decode: beam_size must be >= 1");
    if (!std::isfinite(lm_weight) || !std::isfinite(length_penalty) ||
        !std::isfinite(kbbs_weight))
      throw std::invalid_argument("decode: non-finite weight");
  }
};

/// acoustic + lm_weight·lm + length_penalty·len; the ranking rule of shallow
/// fusion.
inline double shallow_fusion_score(double acoustic_logp, double lm_logp,
                                   const DecodeConfig& cfg, int prefix_len) {
  return acoustic_logp + cfg.lm_weight * lm_logp + cfg.length_penalty * prefix_len;
}

/// Prefix trie over keyword token sequences.
class KeywordTrie {
 public:
  KeywordTrie() { nodes_.push_back(Node{}); }

  KeywordTrie(const KeywordList& keywords, const Vocabulary& vocab, int delimiter_id) {
    nodes_.push_back(Node{});
    for (const KeywordEntry& e : keywords.entries()) {
      auto ids = encode_text(vocab, e.keyword);
      if (!ids.has_value())
        throw DataError("trie: keyword '" + e.keyword + "' not in vocabulary");
      for (int id : ids->ids)
        if (id == delimiter_id)
          throw DataError("trie: keyword '" + e.keyword + "' contains the delimiter");
      int node = 0;
      for (int id : ids->ids) {
        auto it = nodes_[node].children.find(id);
        if (it == nodes_[node].children.end()) {
          nodes_.push_back(Node{});
          nodes_.back().depth = nodes_[node].depth + 1;
          it = nodes_[node].children.emplace(id, static_cast<int>(nodes_.size()) - 1).first;
        }
        node = it->second;
      }
      nodes_[node].terminal_len = ids->length();
    }
  }

  static constexpr int kRoot = 0;
  static constexpr int kDead = -1;

  /// Next state after consuming a token; kDead if the word left the trie.
  int step(int state, int token) const {
    if (state == kDead) return kDead;
    auto it = nodes_[state].children.find(token);
    return it == nodes_[state].children.end() ? kDead : it->second;
  }

  int depth(int state) const { return state == kDead ? 0 : nodes_[state].depth; }

  /// Keyword length if a word ending here is exactly a keyword, else 0.
  int terminal_len(int state) const {
    return state == kDead ? 0 : nodes_[state].terminal_len;
  }

  bool empty() const { return nodes_.size() == 1 && nodes_[0].children.empty(); }

 private:
  struct Node {
    std::map<int, int> children;
    int depth = 0;
    int terminal_len = 0;
  };
  std::vector<Node> nodes_;
};

struct ScoredHypothesis {
  LabelSequence labels;
  double score = 0.0;
};

namespace detail {

struct BeamState {
  double lp_blank = kLogZero;     // prefix mass ending in blank
  double lp_nonblank = kLogZero;  // prefix mass ending in the last token
  double lm_acc = 0.0;            // accumulated raw LM log prob of the prefix
  int trie_state = KeywordTrie::kRoot;
  double locked_bonus = 0.0;      // completed whole-word keyword bonus
  bool attrs_set = false;
};

inline double total_logp(const BeamState& s) { return log_add(s.lp_blank, s.lp_nonblank); }

}  // namespace detail

/// Standard CTC prefix beam search with optional shallow fusion and keyword
/// boosting. Returns up to beam_size hypotheses, best first; ties order by
/// prefix. When lm is null the LM term is zero; when keywords is null or
/// kbbs_weight is 0 the bonus terms are exactly zero, making those runs
/// score-identical to plain beam search.
inline std::vector<ScoredHypothesis> prefix_beam_search(
    const PosteriorGrid& grid, const Vocabulary& vocab, const DecodeConfig& cfg,
    const NgramModel* lm = nullptr, const KeywordList* keywords = nullptr,
    int delimiter_id = -1) {
  cfg.validate();
  if (grid.num_frames() <= 0) throw std::invalid_argument("decode: empty grid");
  if (grid.vocab_size() != vocab.size())
    throw std::invalid_argument("decode: grid/vocabulary size mismatch");

  const int blank = vocab.blank_id();
  const bool boosting = keywords != nullptr && !keywords->empty() ;
  KeywordTrie trie = boosting ? KeywordTrie(*keywords, vocab, delimiter_id)
                              : KeywordTrie();

  using Prefix = std::vector<int>;
  std::map<Prefix, detail::BeamState> beam;
  {
    detail::BeamState init;
    init.lp_blank = 0.0;  // log 1
    init.attrs_set = true;
    beam.emplace(Prefix{}, init);
  }

  // Pruning and final ranking use the same combined score. The provisional
  // part of the bonus (kbbs_weight per trie token of the unfinished word)
  // participates during search and is dropped at finalization.
  auto combined = [&](const Prefix& p, const detail::BeamState& s, bool final_pass) {
    double bonus = s.locked_bonus;
    if (!final_pass) bonus += cfg.kbbs_weight * trie.depth(s.trie_state);
    if (final_pass && trie.terminal_len(s.trie_state) > 0)
      bonus += cfg.kbbs_weight * trie.terminal_len(s.trie_state);
    return shallow_fusion_score(detail::total_logp(s), s.lm_acc, cfg,
                                static_cast<int>(p.size())) +
           bonus;
  };

  for (int t = 0; t < grid.num_frames(); ++t) {
    std::map<Prefix, detail::BeamState> next;
    for (const auto& [prefix, state] : beam) {
      const double p_total = detail::total_logp(state);

      // Blank: prefix unchanged, mass moves to the blank bucket.
      {
        detail::BeamState& ns = next[prefix];
        if (!ns.attrs_set) {
          ns.lm_acc = state.lm_acc;
          ns.trie_state = state.trie_state;
          ns.locked_bonus = state.locked_bonus;
          ns.attrs_set = true;
        }
        ns.lp_blank =
            log_add(ns.lp_blank, p_total + safe_log(grid.probs(t, blank)));
      }

      for (int c = 0; c < vocab.size(); ++c) {
        if (c == blank) continue;
        const double lp_c = safe_log(grid.probs(t, c));
        const bool repeat = !prefix.empty() && prefix.back() == c;

        if (repeat) {
          // Same token, no separating blank: stays the same prefix.
          detail::BeamState& ns = next[prefix];
          if (!ns.attrs_set) {
            ns.lm_acc = state.lm_acc;
            ns.trie_state = state.trie_state;
            ns.locked_bonus = state.locked_bonus;
            ns.attrs_set = true;
          }
          ns.lp_nonblank = log_add(ns.lp_nonblank, state.lp_nonblank + lp_c);
        }

        // Extension; for a repeat only the blank-terminated mass extends.
        Prefix ext = prefix;
        ext.push_back(c);
        double mass = repeat ? state.lp_blank : p_total;
        if (mass == kLogZero) continue;
        detail::BeamState& ns = next[ext];
        if (!ns.attrs_set) {
          ns.lm_acc = state.lm_acc +
                      (lm != nullptr ? lm->score(LabelSequence(prefix), c) : 0.0);
          if (boosting) {
            if (c == delimiter_id) {
              ns.locked_bonus =
                  state.locked_bonus +
                  cfg.kbbs_weight * trie.terminal_len(state.trie_state);
              ns.trie_state = KeywordTrie::kRoot;  // next word starts fresh
            } else {
              ns.locked_bonus = state.locked_bonus;
              ns.trie_state = trie.step(state.trie_state, c);
            }
          } else {
            ns.locked_bonus = state.locked_bonus;
            ns.trie_state = KeywordTrie::kRoot;
          }
          ns.attrs_set = true;
        }
        ns.lp_nonblank = log_add(ns.lp_nonblank, mass + lp_c);
      }
    }

    // Prune to the beam width; deterministic tie-break on the prefix itself.
    std::vector<std::pair<Prefix, detail::BeamState>> ranked(next.begin(), next.end());
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
      double sa = combined(a.first, a.second, false);
      double sb = combined(b.first, b.second, false);
      if (sa != sb) return sa > sb;
      return a.first < b.first;
    });
    if (static_cast<int>(ranked.size()) > cfg.beam_size)
      ranked.resize(cfg.beam_size);
    beam.clear();
    for (auto& [p, s] : ranked) beam.emplace(std::move(p), s);
  }

  std::vector<ScoredHypothesis> out;
  out.reserve(beam.size());
  std::vector<std::pair<Prefix, detail::BeamState>> final_ranked(beam.begin(), beam.end());
  std::sort(final_ranked.begin(), final_ranked.end(), [&](const auto& a, const auto& b) {
    double sa = combined(a.first, a.second, true);
    double sb = combined(b.first, b.second, true);
    if (sa != sb) return sa > sb;
    return a.first < b.first;
  });
  for (const auto& [p, s] : final_ranked)
    out.push_back({LabelSequence(p), combined(p, s, true)});
  return out;
}

}  // namespace interbias

#endif  // INTERBIAS_DECODING_HPP_
