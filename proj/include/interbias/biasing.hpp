// interbias/biasing.hpp

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

// Keyword store with harvested trigger strings, exact whole-word substitution
// in intermediate predictions, and bias-grid construction: the corrected
// hypothesis is Viterbi-aligned back to frames, converted to a onehot grid
// and mixed into the original posterior with weight w_bias. The hook returned
// by interbias_hook plugs this into encoder::forward; with no matches the
// grid passes through untouched and the run is plain self-conditioning.

#ifndef INTERBIAS_BIASING_HPP_
#define INTERBIAS_BIASING_HPP_

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "interbias/ctc.hpp"
#include "interbias/encoder.hpp"
#include "interbias/errors.hpp"
#include "interbias/vocab.hpp"

namespace interbias {

struct KeywordEntry {
  std::string keyword;
  std::vector<std::string> triggers;  // sorted, unique, includes the keyword
};

struct BiasConfig {
  double w_bias = 0.9;  // in [0,1]
  int m_bias = 3;       // lowest layer whose predictions become triggers

  void validate() const {
    if (w_bias < 0.0 || w_bias > 1.0)
      throw std::invalid_argument("bias: w_bias must lie in [0,1]");
    if (m_bias < 1) throw std::invalid_argument("bias: m_bias must be >= 1");
  }
};

/// Immutable after construction; every trigger resolves to exactly one
/// keyword (conflicts are a load-time error).
class KeywordList {
 public:
  KeywordList() = default;

  explicit KeywordList(std::vector<KeywordEntry> entries) : entries_(std::move(entries)) {
    std::set<std::string> seen_keywords;
    for (auto& e : entries_) {
      if (e.keyword.empty()) throw DataError("keywords: empty keyword");
      if (!seen_keywords.insert(e.keyword).second)
        throw DataError("keywords: duplicate keyword '" + e.keyword + "'");
      std::sort(e.triggers.begin(), e.triggers.end());
      e.triggers.erase(std::unique(e.triggers.begin(), e.triggers.end()),
                       e.triggers.end());
      if (e.triggers.empty())
        throw DataError("keywords: no triggers for '" + e.keyword + "'");
    }
    for (size_t i = 0; i < entries_.size(); ++i) {
      for (const std::string& t : entries_[i].triggers) {
        if (t.empty()) throw DataError("keywords: empty trigger");
        auto [it, inserted] = trigger_index_.emplace(t, i);
        if (!inserted && it->second != i)
          throw DataError("keywords: trigger '" + t + "' maps to both '" +
                          entries_[it->second].keyword + "' and '" +
                          entries_[i].keyword + "'");
      }
    }
  }

  const std::vector<KeywordEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }

  /// Keyword for an exactly matching trigger word, or nullptr.
  const KeywordEntry* match(const std::string& word) const {
    auto it = trigger_index_.find(word);
    return it == trigger_index_.end() ? nullptr : &entries_[it->second];
  }

  /// `keyword<TAB>trigger1|trigger2|...`, one line per keyword.
  void save(std::ostream& os) const {
    for (const KeywordEntry& e : entries_) {
      os << e.keyword << "\t";
      for (size_t i = 0; i < e.triggers.size(); ++i)
        os << (i ? "|" : "") << e.triggers[i];
      os << "\n";
    }
  }

  void save_file(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw DataError("keywords: cannot write " + path);
    save(os);
  }

  static KeywordList load(std::istream& is) {
    std::vector<KeywordEntry> entries;
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      size_t tab = line.find('\t');
      if (tab == std::string::npos)
        throw DataError("keywords: missing tab in line: " + line);
      KeywordEntry e;
      e.keyword = line.substr(0, tab);
      std::string rest = line.substr(tab + 1);
      size_t pos = 0;
      while (pos <= rest.size()) {
        size_t bar = rest.find('|', pos);
        if (bar == std::string::npos) bar = rest.size();
        e.triggers.push_back(rest.substr(pos, bar - pos));
        pos = bar + 1;
      }
      entries.push_back(std::move(e));
    }
    return KeywordList(std::move(entries));
  }

  static KeywordList load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("keywords: cannot read " + path);
    return load(is);
  }

 private:
  std::vector<KeywordEntry> entries_;
  std::unordered_map<std::string, size_t> trigger_index_;
};

struct MatchReport {
  struct Item {
    int span_begin = 0;  // token index in the input hypothesis
    int span_len = 0;
    std::string trigger;
    std::string keyword;
  };
  std::vector<Item> items;
  bool empty() const { return items.empty(); }
};

/// Replaces every delimiter-split word that exactly matches a trigger by its
/// keyword. Pure; delimiters and unmatched words pass through unchanged.
inline std::pair<LabelSequence, MatchReport> substitute(const LabelSequence& hypothesis,
                                                        const KeywordList& keywords,
                                                        const Vocabulary& vocab,
                                                        int delimiter_id) {
  if (!vocab.valid_label(delimiter_id))
    throw std::invalid_argument("substitute: delimiter id out of range");
  LabelSequence out;
  MatchReport report;
  const std::vector<int>& ids = hypothesis.ids;
  size_t i = 0;
  while (i < ids.size()) {
    if (ids[i] == delimiter_id) {
      out.ids.push_back(ids[i]);
      ++i;
      continue;
    }
    size_t j = i;
    while (j < ids.size() && ids[j] != delimiter_id) ++j;
    LabelSequence word(std::vector<int>(ids.begin() + i, ids.begin() + j));
    std::string word_str = decode_labels(vocab, word);
    const KeywordEntry* entry = keywords.empty() ? nullptr : keywords.match(word_str);
    if (entry != nullptr && entry->keyword != word_str) {
      auto repl = encode_text(vocab, entry->keyword);
      if (!repl.has_value())
        throw DataError("substitute: keyword '" + entry->keyword +
                        "' not encodable with this vocabulary");
      out.ids.insert(out.ids.end(), repl->ids.begin(), repl->ids.end());
      report.items.push_back({static_cast<int>(i), static_cast<int>(j - i), word_str,
                              entry->keyword});
    } else {
      out.ids.insert(out.ids.end(), word.ids.begin(), word.ids.end());
      if (entry != nullptr) {
        // Exact keyword hit: no text change, but the match still counts so
        // the hook can re-assert (sharpen) an already-correct word.
        report.items.push_back({static_cast<int>(i), static_cast<int>(j - i), word_str,
                                entry->keyword});
      }
    }
    i = j;
  }
  return {std::move(out), std::move(report)};
}

/// Z' = (1 - w_bias)·Z + w_bias·Onehot(Viterbi(biased_hyp, Z)). Falls back to
/// the input grid (with a warning) when the biased hypothesis cannot be
/// aligned within T frames.
inline PosteriorGrid build_bias_grid(const LabelSequence& biased_hyp,
                                     const PosteriorGrid& grid, const BiasConfig& cfg) {
  cfg.validate();
  std::optional<AlignmentPath> path = viterbi_align(biased_hyp, grid);
  if (!path.has_value()) {
    warn("bias: hypothesis of length " + std::to_string(biased_hyp.length()) +
         " not alignable in " + std::to_string(grid.num_frames()) +
         " frames; keeping the original grid");
    return grid;
  }
  const double w = cfg.w_bias;
  Matrix out(grid.num_frames(), grid.vocab_size());
  for (int t = 0; t < grid.num_frames(); ++t) {
    const double* zin = grid.probs.row(t);
    double* zout = out.row(t);
    for (int k = 0; k < grid.vocab_size(); ++k) zout[k] = (1.0 - w) * zin[k];
    zout[path->ids[t]] += w;
  }
  return PosteriorGrid(std::move(out));
}

/// Conditioning hook for encoder::forward. At each conditioning layer the
/// intermediate posterior is greedy-decoded and scanned for triggers; on any
/// match the grid fed to the conditioning projection is rewritten by
/// build_bias_grid. No match (or an empty keyword list) leaves the layer
/// untouched, which keeps the run bit-identical to plain self-conditioning.
inline GridHook interbias_hook(const KeywordList& keywords, const BiasConfig& cfg,
                               const Vocabulary& vocab, int delimiter_id) {
  cfg.validate();
  return [keywords, cfg, vocab, delimiter_id](
             int /*layer*/, const PosteriorGrid& grid) -> std::optional<PosteriorGrid> {
    if (keywords.empty()) return std::nullopt;
    LabelSequence hyp = greedy_decode(grid);
    auto [biased, report] = substitute(hyp, keywords, vocab, delimiter_id);
    if (report.empty()) return std::nullopt;
    return build_bias_grid(biased, grid, cfg);
  };
}

struct HarvestResult {
  KeywordList keywords;
  std::vector<std::pair<std::string, std::string>> failures;  // keyword, reason
};

/// Runs each keyword's synthesized features through the model and records the
/// greedy predictions of layers n >= m_bias plus the final output as trigger
/// strings; the keyword itself is always included. Boundary delimiters are
/// trimmed from predictions. A trigger claimed by two keywords is kept only
/// where it equals the keyword itself and dropped everywhere else.
inline HarvestResult harvest_triggers(
    const std::vector<std::string>& keywords, const EncoderModel& model,
    const std::function<FeatureSequence(const std::string&)>& synthesize,
    const BiasConfig& cfg, int delimiter_id) {
  cfg.validate();
  HarvestResult result;
  std::vector<KeywordEntry> entries;

  auto trim = [&](std::string s) {
    const std::string delim = model.vocab.token(delimiter_id);
    while (s.size() >= delim.size() && s.compare(0, delim.size(), delim) == 0)
      s.erase(0, delim.size());
    while (s.size() >= delim.size() &&
           s.compare(s.size() - delim.size(), delim.size(), delim) == 0)
      s.erase(s.size() - delim.size());
    return s;
  };

  for (const std::string& kw : keywords) {
    auto ids = encode_text(model.vocab, kw);
    if (!ids.has_value() || kw.empty()) {
      result.failures.emplace_back(kw, "contains out-of-vocabulary characters");
      continue;
    }
    bool has_delim = false;
    for (int id : ids->ids) has_delim |= (id == delimiter_id);
    if (has_delim) {
      result.failures.emplace_back(kw, "contains the word delimiter");
      continue;
    }

    ForwardTrace trace = forward(model, synthesize(kw));
    KeywordEntry entry;
    entry.keyword = kw;
    entry.triggers.push_back(kw);
    for (const auto& [layer, pred] : intermediate_predictions(trace, cfg.m_bias)) {
      std::string s = trim(decode_labels(model.vocab, pred));
      if (!s.empty()) entry.triggers.push_back(s);
    }
    std::string final_pred = trim(decode_labels(model.vocab, greedy_decode(trace.final_grid)));
    if (!final_pred.empty()) entry.triggers.push_back(final_pred);
    entries.push_back(std::move(entry));
  }

  // Cross-keyword conflict resolution before the list-level uniqueness check.
  std::map<std::string, std::vector<size_t>> claims;
  for (size_t i = 0; i < entries.size(); ++i)
    for (const std::string& t : entries[i].triggers) claims[t].push_back(i);
  for (auto& [trigger, owners] : claims) {
    std::sort(owners.begin(), owners.end());
    owners.erase(std::unique(owners.begin(), owners.end()), owners.end());
    if (owners.size() < 2) continue;
    for (size_t i : owners) {
      if (entries[i].keyword == trigger) continue;  // self-trigger wins
      auto& tr = entries[i].triggers;
      tr.erase(std::remove(tr.begin(), tr.end(), trigger), tr.end());
    }
  }

  result.keywords = KeywordList(std::move(entries));
  return result;
}

}  // namespace interbias

#endif  // INTERBIAS_BIASING_HPP_
