// interbias/eval.hpp

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

// Character error rate, whole-word keyword F1 with the OOV / non-OOV split,
// the final-output text substitution baseline, and the experiment harness
// comparing {selfcond, textsub, interbias} × {greedy, beam, kbbs} plus a
// beam-size sweep.

#ifndef INTERBIAS_EVAL_HPP_
#define INTERBIAS_EVAL_HPP_

#include <algorithm>
#include <atomic>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "interbias/biasing.hpp"
#include "interbias/decoding.hpp"
#include "interbias/encoder.hpp"
#include "interbias/lm.hpp"
#include "interbias/synth.hpp"
#include "interbias/vocab.hpp"

namespace interbias {

/// Unit-cost edit distance.
inline int levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    prev.swap(cur);
  }
  return prev[b.size()];
}

/// Levenshtein(hyp, ref) / |ref|.
inline double cer(const LabelSequence& hyp, const LabelSequence& ref) {
  if (ref.empty()) throw std::invalid_argument("cer: empty reference");
  return static_cast<double>(levenshtein(hyp.ids, ref.ids)) / ref.length();
}

/// Delimiter-split words of a token sequence, as strings.
inline std::vector<std::string> words_of(const Vocabulary& vocab,
                                         const LabelSequence& seq, int delimiter_id) {
  std::vector<std::string> words;
  std::string cur;
  for (int id : seq.ids) {
    if (id == delimiter_id) {
      if (!cur.empty()) words.push_back(cur);
      cur.clear();
    } else {
      cur += vocab.token(id);
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

struct PrCounts {
  int tp = 0, fp = 0, fn = 0;

  double precision() const { return tp + fp == 0 ? 0.0 : double(tp) / (tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : double(tp) / (tp + fn); }
  double f1() const {
    double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

struct KeywordScore {
  PrCounts oov, nonoov;
  std::map<std::string, PrCounts> per_keyword;
};

/// Bag-of-words occurrence matching per utterance: tp = min(ref, hyp)
/// occurrences, fn the missing refs, fp the spurious hyps.
inline KeywordScore keyword_f1(const std::vector<LabelSequence>& hyps,
                               const std::vector<LabelSequence>& refs,
                               const std::vector<KeywordMeta>& keywords,
                               const Vocabulary& vocab, int delimiter_id) {
  if (hyps.size() != refs.size())
    throw std::invalid_argument("keyword_f1: hyp/ref length mismatch");
  KeywordScore score;
  for (const KeywordMeta& km : keywords) score.per_keyword[km.keyword] = PrCounts{};

  for (size_t i = 0; i < refs.size(); ++i) {
    std::vector<std::string> ref_words = words_of(vocab, refs[i], delimiter_id);
    std::vector<std::string> hyp_words = words_of(vocab, hyps[i], delimiter_id);
    for (const KeywordMeta& km : keywords) {
      int in_ref = static_cast<int>(
          std::count(ref_words.begin(), ref_words.end(), km.keyword));
      int in_hyp = static_cast<int>(
          std::count(hyp_words.begin(), hyp_words.end(), km.keyword));
      int tp = std::min(in_ref, in_hyp);
      PrCounts& pk = score.per_keyword[km.keyword];
      PrCounts& agg = km.oov ? score.oov : score.nonoov;
      pk.tp += tp;
      pk.fn += in_ref - tp;
      pk.fp += in_hyp - tp;
      agg.tp += tp;
      agg.fn += in_ref - tp;
      agg.fp += in_hyp - tp;
    }
  }
  return score;
}

/// The same substitution rule as the biasing hook, applied once to a final
/// hypothesis. This is the baseline that over-corrects: it cannot consult
/// acoustics, so a trigger string that legitimately occurs gets replaced too.
inline LabelSequence textsub_baseline(const LabelSequence& hyp, const KeywordList& keywords,
                                      const Vocabulary& vocab, int delimiter_id) {
  return substitute(hyp, keywords, vocab, delimiter_id).first;
}

struct ReportRow {
  std::string method;  // selfcond | textsub | interbias
  std::string mode;    // greedy | beam | kbbs
  int beam_size = 1;
  double cer = 0.0;
  double oov_f1 = 0.0;
  double nonoov_f1 = 0.0;
};

struct EvalReport {
  std::vector<ReportRow> rows;

  const ReportRow& row(const std::string& method, const std::string& mode,
                       int beam_size) const {
    for (const ReportRow& r : rows)
      if (r.method == method && r.mode == mode && r.beam_size == beam_size) return r;
    throw std::invalid_argument("report: no row " + method + "/" + mode + "/" +
                                std::to_string(beam_size));
  }

  std::string to_csv() const {
    std::string out = "method,decode_mode,beam_size,cer,oov_f1,nonoov_f1\n";
    char buf[160];
    for (const ReportRow& r : rows) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.6f,%.6f,%.6f\n", r.method.c_str(),
                    r.mode.c_str(), r.beam_size, r.cer, r.oov_f1, r.nonoov_f1);
      out += buf;
    }
    return out;
  }

  /// Aligned table, one line per (method, mode) cell:
  /// CER% / OOV F1% / non-OOV F1%.
  std::string to_table() const {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s %-8s %6s %8s %8s %10s\n", "method", "mode",
                  "beam", "cer%", "oov_f1%", "nonoov_f1%");
    out += buf;
    for (const ReportRow& r : rows) {
      std::snprintf(buf, sizeof(buf), "%-12s %-8s %6d %8.2f %8.2f %10.2f\n",
                    r.method.c_str(), r.mode.c_str(), r.beam_size, 100.0 * r.cer,
                    100.0 * r.oov_f1, 100.0 * r.nonoov_f1);
      out += buf;
    }
    return out;
  }
};

struct ExperimentConfig {
  DecodeConfig beam;             // used for mode "beam" (kbbs_weight ignored)
  DecodeConfig kbbs;             // used for mode "kbbs"
  BiasConfig bias;
  std::vector<int> sweep_beam_sizes;  // kbbs-mode sweep; empty disables
  int threads = 0;               // 0 → hardware concurrency
};

namespace detail {

struct Cell {
  std::string method, mode;
  int beam_size;
};

template <typename Fn>
inline void parallel_for(size_t n, int threads, Fn&& fn) {
  if (threads <= 0)
    threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, static_cast<int>(n));
  if (threads <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<size_t> next{0};
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      while (true) {
        size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  for (std::thread& th : pool) th.join();
}

}  // namespace detail

/// Decodes every test utterance under all (method, mode) cells and the
/// beam-size sweep, then scores CER and keyword F1 per cell. Per-utterance
/// work is parallel; aggregation is index-ordered, so the report is
/// deterministic.
inline EvalReport run_experiment(const std::vector<Utterance>& test,
                                 const std::vector<KeywordMeta>& keywords_meta,
                                 const EncoderModel& model, const KeywordList& keywords,
                                 const NgramModel& lm, const ExperimentConfig& cfg,
                                 int delimiter_id) {
  std::vector<detail::Cell> cells;
  for (const char* method : {"selfcond", "textsub", "interbias"}) {
    cells.push_back({method, "greedy", 1});
    cells.push_back({method, "beam", cfg.beam.beam_size});
    cells.push_back({method, "kbbs", cfg.kbbs.beam_size});
  }
  for (const char* method : {"selfcond", "interbias"})
    for (int b : cfg.sweep_beam_sizes)
      if (b != cfg.kbbs.beam_size) cells.push_back({method, "kbbs", b});

  const size_t n = test.size();
  std::vector<LabelSequence> refs(n);
  std::vector<std::vector<LabelSequence>> hyps(cells.size(),
                                               std::vector<LabelSequence>(n));

  GridHook hook = interbias_hook(keywords, cfg.bias, model.vocab, delimiter_id);

  detail::parallel_for(n, cfg.threads, [&](size_t i) {
    const Utterance& utt = test[i];
    auto ref = encode_text(model.vocab, utt.text);
    if (!ref.has_value()) throw DataError("eval: test text not encodable: " + utt.text);
    refs[i] = *ref;

    PosteriorGrid sc_grid = forward(model, utt.features).final_grid;
    PosteriorGrid ib_grid = forward(model, utt.features, hook).final_grid;

    // Hypothesis cache per (source grid, mode, beam); textsub shares the
    // selfcond decodes.
    std::map<std::string, LabelSequence> cache;
    auto decode = [&](const std::string& method, const std::string& mode,
                      int beam_size) -> LabelSequence {
      const PosteriorGrid& grid = method == "interbias" ? ib_grid : sc_grid;
      std::string key = (method == "interbias" ? "ib/" : "sc/") + mode + "/" +
                        std::to_string(beam_size);
      auto it = cache.find(key);
      if (it != cache.end()) return it->second;
      LabelSequence hyp;
      if (mode == "greedy") {
        hyp = greedy_decode(grid);
      } else {
        DecodeConfig dc = mode == "beam" ? cfg.beam : cfg.kbbs;
        if (mode == "beam") dc.kbbs_weight = 0.0;
        dc.beam_size = beam_size;
        const KeywordList* kw = mode == "kbbs" ? &keywords : nullptr;
        auto ranked = prefix_beam_search(grid, model.vocab, dc, &lm, kw, delimiter_id);
        hyp = ranked.empty() ? LabelSequence{} : ranked.front().labels;
      }
      cache.emplace(key, hyp);
      return hyp;
    };

    for (size_t c = 0; c < cells.size(); ++c) {
      const detail::Cell& cell = cells[c];
      LabelSequence hyp = decode(cell.method, cell.mode, cell.beam_size);
      if (cell.method == "textsub")
        hyp = textsub_baseline(hyp, keywords, model.vocab, delimiter_id);
      hyps[c][i] = std::move(hyp);
    }
  });

  EvalReport report;
  for (size_t c = 0; c < cells.size(); ++c) {
    int64_t edits = 0, ref_len = 0;
    for (size_t i = 0; i < n; ++i) {
      edits += levenshtein(hyps[c][i].ids, refs[i].ids);
      ref_len += refs[i].length();
    }
    KeywordScore ks = keyword_f1(hyps[c], refs, keywords_meta, model.vocab, delimiter_id);
    ReportRow row;
    row.method = cells[c].method;
    row.mode = cells[c].mode;
    row.beam_size = cells[c].beam_size;
    row.cer = ref_len > 0 ? static_cast<double>(edits) / ref_len : 0.0;
    row.oov_f1 = ks.oov.f1();
    row.nonoov_f1 = ks.nonoov.f1();
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace interbias

#endif  // INTERBIAS_EVAL_HPP_
