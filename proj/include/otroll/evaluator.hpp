#ifndef OTROLL_EVALUATOR_HPP
#define OTROLL_EVALUATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "otroll/errors.hpp"
#include "otroll/grid.hpp"

namespace otroll {

/// Note-matching tolerances. Onsets must agree within `onset_tol_s`; with
/// `use_offsets` the offsets must agree within
/// max(offset_min_tol_s, offset_ratio * reference duration).
struct MatchParams {
  double onset_tol_s = 0.05;
  double offset_min_tol_s = 0.05;
  double offset_ratio = 0.2;
  bool use_offsets = false;

  void validate() const {
    if (!(onset_tol_s > 0.0) || !(offset_min_tol_s > 0.0))
      throw ValidationError("match: tolerances must be positive");
    if (!(offset_ratio > 0.0 && offset_ratio <= 1.0))
      throw ValidationError("match: offset_ratio must lie in (0, 1]");
  }
};

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_ref = 0;
  std::size_t n_est = 0;
  std::size_t n_match = 0;
  std::vector<std::pair<std::size_t, std::size_t>> matches;  ///< (ref_idx, est_idx)
};

// Absorbs decimal round-off so that a 50 ms difference computed from binary
// times still counts as within a 50 ms window.
inline constexpr double kToleranceSlack = 1e-9;

inline bool notes_match(const NoteEvent& ref, const NoteEvent& est, const MatchParams& params) {
  if (ref.pitch != est.pitch) return false;
  if (std::abs(ref.onset_s - est.onset_s) > params.onset_tol_s + kToleranceSlack) return false;
  if (params.use_offsets) {
    const double tol = std::max(params.offset_min_tol_s,
                                params.offset_ratio * (ref.offset_s - ref.onset_s));
    if (std::abs(ref.offset_s - est.offset_s) > tol + kToleranceSlack) return false;
  }
  return true;
}

inline EvalReport make_report(std::size_t n_ref, std::size_t n_est,
                              std::vector<std::pair<std::size_t, std::size_t>> matches) {
  EvalReport r;
  r.n_ref = n_ref;
  r.n_est = n_est;
  r.n_match = matches.size();
  r.matches = std::move(matches);
  const auto n_match = static_cast<double>(r.n_match);
  r.precision = n_est == 0 ? 1.0 : n_match / static_cast<double>(n_est);
  r.recall = n_ref == 0 ? 1.0 : n_match / static_cast<double>(n_ref);
  r.f1 = (r.precision + r.recall) == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

/// Precision, recall and F1 from a maximum one-to-one matching of reference
/// to estimated notes.
///
/// Augmenting paths are explored from each reference in index order, trying
/// estimates by increasing onset error then index, so the pair list is
/// deterministic. The matching size is maximum regardless of that order.
inline EvalReport match_notes(const NoteList& ref, const NoteList& est, const MatchParams& params = {}) {
  params.validate();
  const std::size_t n_ref = ref.size();
  const std::size_t n_est = est.size();

  std::vector<std::vector<std::size_t>> adj(n_ref);
  for (std::size_t r = 0; r < n_ref; ++r) {
    for (std::size_t e = 0; e < n_est; ++e)
      if (notes_match(ref[r], est[e], params)) adj[r].push_back(e);
    std::stable_sort(adj[r].begin(), adj[r].end(), [&](std::size_t a, std::size_t b) {
      return std::abs(ref[r].onset_s - est[a].onset_s) < std::abs(ref[r].onset_s - est[b].onset_s);
    });
  }

  constexpr std::size_t kFree = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(n_est, kFree);  // est -> ref
  std::vector<char> visited;
  auto augment = [&](auto&& self, std::size_t r) -> bool {
    for (std::size_t e : adj[r]) {
      if (visited[e]) continue;
      visited[e] = 1;
      if (owner[e] == kFree || self(self, owner[e])) {
        owner[e] = r;
        return true;
      }
    }
    return false;
  };
  for (std::size_t r = 0; r < n_ref; ++r) {
    visited.assign(n_est, 0);
    augment(augment, r);
  }

  std::vector<std::pair<std::size_t, std::size_t>> matches;
  for (std::size_t e = 0; e < n_est; ++e)
    if (owner[e] != kFree) matches.emplace_back(owner[e], e);
  std::sort(matches.begin(), matches.end());
  return make_report(n_ref, n_est, std::move(matches));
}

}  // namespace otroll

#endif  // OTROLL_EVALUATOR_HPP
