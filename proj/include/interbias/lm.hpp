// interbias/lm.hpp

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

// Character n-gram language model for shallow fusion. Add-k smoothing inside
// each stored context; whole-context backoff to the longest stored suffix
// (down to the always-stored unigram context), so every conditional
// distribution sums to one. Contexts see an internal sentence-start symbol;
// there is no end-of-sentence event.

#ifndef INTERBIAS_LM_HPP_
#define INTERBIAS_LM_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "interbias/errors.hpp"
#include "interbias/vocab.hpp"

namespace interbias {

class NgramModel {
 public:
  NgramModel() = default;

  int order() const { return order_; }
  int lm_vocab() const { return num_labels_; }

  /// Maximum-likelihood counts with add-k smoothing and backoff to shorter
  /// stored contexts. Blank never appears in transcripts, so the event space
  /// is the label set V.
  static NgramModel fit(const std::vector<LabelSequence>& corpus,
                        const Vocabulary& vocab, int order, double k = 0.1) {
    if (order < 1) throw std::invalid_argument("lm: order must be >= 1");
    if (corpus.empty()) throw std::invalid_argument("lm: empty corpus");
    if (k < 0.0) throw std::invalid_argument("lm: negative smoothing constant");

    NgramModel m;
    m.order_ = order;
    m.num_labels_ = vocab.num_labels();
    m.k_ = k;

    std::map<std::vector<int>, std::map<int, int64_t>> counts;
    for (const LabelSequence& sent : corpus) {
      std::vector<int> padded;
      padded.push_back(kBos);
      for (int id : sent.ids) {
        if (id < 0 || id >= m.num_labels_)
          throw std::invalid_argument("lm: corpus token out of range");
        padded.push_back(id);
      }
      for (size_t i = 1; i < padded.size(); ++i) {
        int next = padded[i];
        for (int len = 0; len < order; ++len) {
          if (static_cast<size_t>(len) > i) break;
          std::vector<int> ctx(padded.begin() + (i - len), padded.begin() + i);
          counts[ctx][next] += 1;
        }
      }
    }

    // Freeze log probabilities; these tables are the model (and the file).
    for (const auto& [ctx, nexts] : counts) {
      int64_t total = 0;
      for (const auto& [tok, c] : nexts) total += c;
      double denom = static_cast<double>(total) + k * m.num_labels_;
      ContextTable table;
      table.floor_logp = std::log(k / denom);
      for (const auto& [tok, c] : nexts)
        table.logp[tok] = std::log((static_cast<double>(c) + k) / denom);
      m.tables_.emplace(ctx, std::move(table));
    }
    if (k == 0.0) {
      // Pure MLE: unseen events inside a stored context get -inf.
      for (auto& [ctx, table] : m.tables_)
        table.floor_logp = -std::numeric_limits<double>::infinity();
    }
    return m;
  }

  /// log P(next | context). The context is the utterance so far; a sentence
  /// start symbol is prepended internally and the lookup is truncated to
  /// order-1 tokens.
  double score(const LabelSequence& context, int next) const {
    if (next < 0 || next >= num_labels_)
      throw std::invalid_argument("lm: next token out of range");
    std::vector<int> ctx;
    ctx.push_back(kBos);
    ctx.insert(ctx.end(), context.ids.begin(), context.ids.end());
    size_t keep = static_cast<size_t>(order_ - 1);
    if (ctx.size() > keep) ctx.erase(ctx.begin(), ctx.end() - keep);

    while (true) {
      auto it = tables_.find(ctx);
      if (it != tables_.end()) {
        auto jt = it->second.logp.find(next);
        return jt != it->second.logp.end() ? jt->second : it->second.floor_logp;
      }
      if (ctx.empty()) throw DataError("lm: missing unigram table");
      ctx.erase(ctx.begin());
    }
  }

  /// Total log probability of a sequence under left-to-right scoring.
  double sequence_logp(const LabelSequence& seq) const {
    double total = 0.0;
    LabelSequence prefix;
    for (int id : seq.ids) {
      total += score(prefix, id);
      prefix.ids.push_back(id);
    }
    return total;
  }

  /// Sorted text format: `ngram <order>`, then per-order blocks of
  /// `logprob<TAB>tokens`. The `<unk>` pseudo-token carries each stored
  /// context's unseen-event probability; `<s>` is the sentence start.
  void save(std::ostream& os, const Vocabulary& vocab) const {
    os << "ngram\t" << order_ << "\n";
    os << "labels\t" << num_labels_ << "\n";
    for (int len = 0; len < order_; ++len) {
      os << "\\" << (len + 1) << "-grams:\n";
      for (const auto& [ctx, table] : tables_) {
        if (static_cast<int>(ctx.size()) != len) continue;
        std::string prefix;
        for (int id : ctx) prefix += token_name(vocab, id) + " ";
        for (const auto& [tok, logp] : table.logp)
          os << format_logp(logp) << "\t" << prefix << token_name(vocab, tok) << "\n";
        os << format_logp(table.floor_logp) << "\t" << prefix << "<unk>\n";
      }
    }
  }

  void save_file(const std::string& path, const Vocabulary& vocab) const {
    std::ofstream os(path);
    if (!os) throw DataError("lm: cannot write " + path);
    save(os, vocab);
  }

  static NgramModel load(std::istream& is, const Vocabulary& vocab) {
    NgramModel m;
    std::string line;
    if (!std::getline(is, line) || line.rfind("ngram\t", 0) != 0)
      throw DataError("lm: bad header");
    m.order_ = std::stoi(line.substr(6));
    if (!std::getline(is, line) || line.rfind("labels\t", 0) != 0)
      throw DataError("lm: bad header");
    m.num_labels_ = std::stoi(line.substr(7));
    if (m.num_labels_ != vocab.num_labels())
      throw DataError("lm: label count does not match vocabulary");

    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '\\') continue;
      size_t tab = line.find('\t');
      if (tab == std::string::npos) throw DataError("lm: bad line: " + line);
      double logp = std::stod(line.substr(0, tab));
      std::istringstream toks(line.substr(tab + 1));
      std::vector<std::string> names;
      std::string tk;
      while (toks >> tk) names.push_back(tk);
      if (names.empty()) throw DataError("lm: empty ngram line");
      std::vector<int> ctx;
      for (size_t i = 0; i + 1 < names.size(); ++i) ctx.push_back(m.parse_token(vocab, names[i]));
      const std::string& last = names.back();
      if (last == "<unk>") {
        m.tables_[ctx].floor_logp = logp;
      } else {
        m.tables_[ctx].logp[m.parse_token(vocab, last)] = logp;
      }
    }
    if (m.tables_.find({}) == m.tables_.end())
      throw DataError("lm: file has no unigram block");
    return m;
  }

  static NgramModel load_file(const std::string& path, const Vocabulary& vocab) {
    std::ifstream is(path);
    if (!is) throw DataError("lm: cannot read " + path);
    return load(is, vocab);
  }

  bool operator==(const NgramModel& o) const {
    if (order_ != o.order_ || num_labels_ != o.num_labels_) return false;
    if (tables_.size() != o.tables_.size()) return false;
    for (const auto& [ctx, table] : tables_) {
      auto it = o.tables_.find(ctx);
      if (it == o.tables_.end()) return false;
      if (table.floor_logp != it->second.floor_logp) return false;
      if (table.logp != it->second.logp) return false;
    }
    return true;
  }

 private:
  static constexpr int kBos = -1;

  struct ContextTable {
    std::map<int, double> logp;
    double floor_logp = -std::numeric_limits<double>::infinity();
  };

  static std::string format_logp(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }

  static std::string token_name(const Vocabulary& vocab, int id) {
    return id == kBos ? "<s>" : vocab.token(id);
  }

  int parse_token(const Vocabulary& vocab, const std::string& name) const {
    if (name == "<s>") return kBos;
    int id = vocab.id_of(name);
    if (id < 0 || id >= num_labels_) throw DataError("lm: unknown token '" + name + "'");
    return id;
  }

  int order_ = 0;
  int num_labels_ = 0;
  double k_ = 0.1;
  std::map<std::vector<int>, ContextTable> tables_;
};

}  // namespace interbias

#endif  // INTERBIAS_LM_HPP_
