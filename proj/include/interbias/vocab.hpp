// interbias/vocab.hpp

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

#ifndef INTERBIAS_VOCAB_HPP_
#define INTERBIAS_VOCAB_HPP_

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "interbias/errors.hpp"
#include "interbias/matrix.hpp"

namespace interbias {

inline constexpr const char* kBlankToken = "<blank>";

/// Token inventory. Labels occupy ids 0..num_labels()-1 and the blank always
/// sits at the last id, so every posterior column layout is fixed by
/// construction.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Builds V' from the label set V; the blank is appended internally.
  static Vocabulary from_labels(const std::vector<std::string>& labels) {
    Vocabulary v;
    v.tokens_ = labels;
    v.tokens_.push_back(kBlankToken);
    v.build_index();
    return v;
  }

  /// All of V' including the trailing blank.
  const std::vector<std::string>& tokens() const { return tokens_; }

  int size() const { return static_cast<int>(tokens_.size()); }   // |V'|
  int num_labels() const { return size() - 1; }                   // |V|
  int blank_id() const { return size() - 1; }

  const std::string& token(int id) const { return tokens_.at(id); }

  /// Id of a token string, -1 if unknown.
  int id_of(std::string_view tok) const {
    auto it = index_.find(std::string(tok));
    return it == index_.end() ? -1 : it->second;
  }

  bool valid_label(int id) const { return id >= 0 && id < num_labels(); }
  bool valid_token(int id) const { return id >= 0 && id < size(); }

 private:
  void build_index() {
    index_.clear();
    for (size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i].empty()) throw DataError("vocabulary: empty token");
      if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
        throw DataError("vocabulary: duplicate token '" + tokens_[i] + "'");
    }
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Collapsed token sequence: never contains the blank id.
struct LabelSequence {
  std::vector<int> ids;

  LabelSequence() = default;
  LabelSequence(std::initializer_list<int> init) : ids(init) {}
  explicit LabelSequence(std::vector<int> v) : ids(std::move(v)) {}

  int length() const { return static_cast<int>(ids.size()); }
  bool empty() const { return ids.empty(); }
  bool operator==(const LabelSequence&) const = default;
};

/// Frame-level path over V' (blanks allowed); length equals the frame count
/// of the grid it aligns.
struct AlignmentPath {
  std::vector<int> ids;

  AlignmentPath() = default;
  AlignmentPath(std::initializer_list<int> init) : ids(init) {}
  explicit AlignmentPath(std::vector<int> v) : ids(std::move(v)) {}

  int length() const { return static_cast<int>(ids.size()); }
  bool operator==(const AlignmentPath&) const = default;
};

/// T×|V'| row-stochastic matrix of per-frame token posteriors.
struct PosteriorGrid {
  Matrix probs;

  PosteriorGrid() = default;
  explicit PosteriorGrid(Matrix m) : probs(std::move(m)) {}

  int num_frames() const { return probs.rows(); }
  int vocab_size() const { return probs.cols(); }

  double max_row_sum_error() const {
    double worst = 0.0;
    for (int t = 0; t < probs.rows(); ++t) {
      double s = 0.0;
      for (int k = 0; k < probs.cols(); ++k) s += probs(t, k);
      worst = std::max(worst, std::fabs(s - 1.0));
    }
    return worst;
  }

  bool is_row_stochastic(double tol = 1e-6) const {
    for (const double v : probs.data())
      if (v < 0.0 || v > 1.0 + tol) return false;
    return max_row_sum_error() <= tol;
  }

  bool operator==(const PosteriorGrid&) const = default;
};

/// Frame-rate feature rows; one row per frame.
using FeatureSequence = Matrix;

/// Encodes a text into single-character tokens. Returns nullopt if any
/// character is out of vocabulary.
inline std::optional<LabelSequence> encode_text(const Vocabulary& vocab,
                                                std::string_view text) {
  LabelSequence out;
  out.ids.reserve(text.size());
  for (char c : text) {
    int id = vocab.id_of(std::string_view(&c, 1));
    if (id < 0 || id == vocab.blank_id()) return std::nullopt;
    out.ids.push_back(id);
  }
  return out;
}

inline std::string decode_labels(const Vocabulary& vocab, const LabelSequence& seq) {
  std::string out;
  for (int id : seq.ids) {
    if (!vocab.valid_label(id))
      throw std::invalid_argument("decode_labels: id out of range");
    out += vocab.token(id);
  }
  return out;
}

}  // namespace interbias

#endif  // INTERBIAS_VOCAB_HPP_
