// interbias/ctc.hpp

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

// Collapsing function, CTC loss and gradient, greedy decoding and Viterbi
// forced alignment over posterior grids. Everything accumulates in log space
// with probabilities floored at kProbFloor; deterministic tie-breaking
// throughout (argmax prefers the lowest token id, Viterbi prefers staying on
// the current lattice state).

#ifndef INTERBIAS_CTC_HPP_
#define INTERBIAS_CTC_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "interbias/matrix.hpp"
#include "interbias/vocab.hpp"

namespace interbias {

inline constexpr double kProbFloor = 1e-30;
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

namespace detail {

// Extended label sequence ε y1 ε y2 ε ... yL ε, as token ids.
inline std::vector<int> extended_labels(const LabelSequence& target, int blank_id) {
  std::vector<int> ext(2 * target.ids.size() + 1, blank_id);
  for (size_t i = 0; i < target.ids.size(); ++i) ext[2 * i + 1] = target.ids[i];
  return ext;
}

inline void check_grid(const PosteriorGrid& grid) {
  if (grid.num_frames() <= 0 || grid.vocab_size() <= 1)
    throw std::invalid_argument("ctc: empty grid");
}

inline void check_target(const LabelSequence& target, const PosteriorGrid& grid) {
  int blank = grid.vocab_size() - 1;
  for (int id : target.ids)
    if (id < 0 || id >= grid.vocab_size() || id == blank)
      throw std::invalid_argument("ctc: target id out of range or blank");
}

// Can the lattice skip from state s-2 straight to s?
inline bool can_skip(const std::vector<int>& ext, int s, int blank_id) {
  return s >= 2 && ext[s] != blank_id && ext[s] != ext[s - 2];
}

}  // namespace detail

/// Merges adjacent repeats, then removes blanks.
inline LabelSequence collapse(const AlignmentPath& path, const Vocabulary& vocab) {
  LabelSequence out;
  int prev = -1;
  for (int id : path.ids) {
    if (!vocab.valid_token(id))
      throw std::invalid_argument("collapse: token id out of range");
    if (id != prev && id != vocab.blank_id()) out.ids.push_back(id);
    prev = id;
  }
  return out;
}

/// Shortest frame count that still admits a valid alignment: one frame per
/// label plus one separating blank per adjacent repeat.
inline int min_frames_required(const LabelSequence& target) {
  int need = target.length();
  for (size_t i = 1; i < target.ids.size(); ++i)
    if (target.ids[i] == target.ids[i - 1]) ++need;
  return need;
}

/// Negative log-likelihood of the target summed over all alignment paths.
/// Empty result means no path of length T can collapse to the target.
inline std::optional<double> ctc_loss(const PosteriorGrid& grid,
                                      const LabelSequence& target) {
  detail::check_grid(grid);
  detail::check_target(target, grid);
  const int T = grid.num_frames();
  if (T < min_frames_required(target)) return std::nullopt;

  const int blank = grid.vocab_size() - 1;
  const std::vector<int> ext = detail::extended_labels(target, blank);
  const int S = static_cast<int>(ext.size());

  std::vector<double> alpha(S, kLogZero), next(S, kLogZero);
  alpha[0] = safe_log(grid.probs(0, ext[0]));
  if (S > 1) alpha[1] = safe_log(grid.probs(0, ext[1]));

  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double acc = alpha[s];
      if (s >= 1) acc = log_add(acc, alpha[s - 1]);
      if (detail::can_skip(ext, s, blank)) acc = log_add(acc, alpha[s - 2]);
      next[s] = acc == kLogZero ? kLogZero : acc + safe_log(grid.probs(t, ext[s]));
    }
    alpha.swap(next);
  }

  double log_p = alpha[S - 1];
  if (S > 1) log_p = log_add(log_p, alpha[S - 2]);
  return -log_p;
}

/// ∂(-log P)/∂z_{t,k} via forward-backward occupancy. Same infeasibility
/// contract as ctc_loss.
inline std::optional<Matrix> ctc_loss_grad(const PosteriorGrid& grid,
                                           const LabelSequence& target) {
  detail::check_grid(grid);
  detail::check_target(target, grid);
  const int T = grid.num_frames();
  if (T < min_frames_required(target)) return std::nullopt;

  const int blank = grid.vocab_size() - 1;
  const std::vector<int> ext = detail::extended_labels(target, blank);
  const int S = static_cast<int>(ext.size());

  // log z for extended states, floored once.
  Matrix lz(T, S);
  for (int t = 0; t < T; ++t)
    for (int s = 0; s < S; ++s) lz(t, s) = safe_log(grid.probs(t, ext[s]));

  Matrix alpha(T, S, kLogZero), beta(T, S, kLogZero);
  alpha(0, 0) = lz(0, 0);
  if (S > 1) alpha(0, 1) = lz(0, 1);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (detail::can_skip(ext, s, blank)) acc = log_add(acc, alpha(t - 1, s - 2));
      alpha(t, s) = acc == kLogZero ? kLogZero : acc + lz(t, s);
    }
  }

  beta(T - 1, S - 1) = lz(T - 1, S - 1);
  if (S > 1) beta(T - 1, S - 2) = lz(T - 1, S - 2);
  for (int t = T - 2; t >= 0; --t) {
    for (int s = S - 1; s >= 0; --s) {
      double acc = beta(t + 1, s);
      if (s + 1 < S) acc = log_add(acc, beta(t + 1, s + 1));
      if (s + 2 < S && detail::can_skip(ext, s + 2, blank))
        acc = log_add(acc, beta(t + 1, s + 2));
      beta(t, s) = acc == kLogZero ? kLogZero : acc + lz(t, s);
    }
  }

  double log_p = alpha(T - 1, S - 1);
  if (S > 1) log_p = log_add(log_p, alpha(T - 1, S - 2));

  // alpha and beta both include the frame-t emission, so divide it out twice:
  // dP/dz_{t,k} = sum_{s: ext[s]=k} alpha_t(s) beta_t(s) / z_{t,k}^2.
  Matrix grad(T, grid.vocab_size());
  for (int t = 0; t < T; ++t) {
    std::vector<double> occ(grid.vocab_size(), kLogZero);
    for (int s = 0; s < S; ++s) {
      double ab = alpha(t, s) + beta(t, s);
      if (ab != kLogZero) occ[ext[s]] = log_add(occ[ext[s]], ab);
    }
    for (int k = 0; k < grid.vocab_size(); ++k) {
      if (occ[k] == kLogZero) continue;
      double lzk = safe_log(grid.probs(t, k));
      grad(t, k) = -std::exp(occ[k] - log_p - 2.0 * lzk);
    }
  }
  return grad;
}

/// Per-frame argmax (lowest id wins ties) followed by collapse.
inline LabelSequence greedy_decode(const PosteriorGrid& grid) {
  detail::check_grid(grid);
  AlignmentPath path;
  path.ids.reserve(grid.num_frames());
  for (int t = 0; t < grid.num_frames(); ++t) {
    int best = 0;
    for (int k = 1; k < grid.vocab_size(); ++k)
      if (grid.probs(t, k) > grid.probs(t, best)) best = k;
    path.ids.push_back(best);
  }
  LabelSequence out;
  int blank = grid.vocab_size() - 1;
  int prev = -1;
  for (int id : path.ids) {
    if (id != prev && id != blank) out.ids.push_back(id);
    prev = id;
  }
  return out;
}

/// Most probable alignment path collapsing to the target. Ties prefer the
/// predecessor that stays on the current lattice state, then the smaller
/// state step; the end state prefers the final label over the final blank.
inline std::optional<AlignmentPath> viterbi_align(const LabelSequence& target,
                                                  const PosteriorGrid& grid) {
  detail::check_grid(grid);
  detail::check_target(target, grid);
  const int T = grid.num_frames();
  if (T < min_frames_required(target)) return std::nullopt;

  const int blank = grid.vocab_size() - 1;
  const std::vector<int> ext = detail::extended_labels(target, blank);
  const int S = static_cast<int>(ext.size());

  Matrix delta(T, S, kLogZero);
  std::vector<std::vector<int>> back(T, std::vector<int>(S, -1));
  delta(0, 0) = safe_log(grid.probs(0, ext[0]));
  if (S > 1) delta(0, 1) = safe_log(grid.probs(0, ext[1]));

  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double best = delta(t - 1, s);
      int arg = s;
      if (s >= 1 && delta(t - 1, s - 1) > best) {
        best = delta(t - 1, s - 1);
        arg = s - 1;
      }
      if (detail::can_skip(ext, s, blank) && delta(t - 1, s - 2) > best) {
        best = delta(t - 1, s - 2);
        arg = s - 2;
      }
      if (best == kLogZero) continue;
      delta(t, s) = best + safe_log(grid.probs(t, ext[s]));
      back[t][s] = arg;
    }
  }

  int end = S - 1;
  if (S > 1 && delta(T - 1, S - 2) >= delta(T - 1, S - 1)) end = S - 2;
  if (delta(T - 1, end) == kLogZero) return std::nullopt;

  AlignmentPath path;
  path.ids.resize(T);
  int s = end;
  for (int t = T - 1; t >= 0; --t) {
    path.ids[t] = ext[s];
    if (t > 0) s = back[t][s];
  }
  return path;
}

}  // namespace interbias

#endif  // INTERBIAS_CTC_HPP_
