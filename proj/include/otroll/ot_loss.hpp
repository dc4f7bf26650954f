#ifndef OTROLL_OT_LOSS_HPP
#define OTROLL_OT_LOSS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <limits>
#include <string>
#include <vector>

#include "otroll/errors.hpp"
#include "otroll/grid.hpp"
#include "otroll/matrix.hpp"

namespace otroll {

/// Parameters of the capped transport cost and the mass penalty.
///
/// `tau0` caps same-pitch transport (in frames), `tau1` is the prohibitive
/// cross-pitch cost, `lambda` weights the squared mass penalty.
struct CostParams {
  double tau0 = 5.0;
  double tau1 = 1000.0;
  double lambda = 1.0;

  void validate() const {
    if (!(tau0 >= 0.0) || !std::isfinite(tau0)) throw ValidationError("tau0 must be >= 0");
    if (!std::isfinite(tau1) || !(tau1 > tau0)) throw ValidationError("tau1 must exceed tau0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be >= 0");
  }

  friend bool operator==(const CostParams&, const CostParams&) = default;
};

/// Cost of moving one unit of mass between two cells.
inline double transport_cost(Cell a, Cell b, const CostParams& params) noexcept {
  if (a.pitch != b.pitch) return params.tau1;
  return std::min(static_cast<double>(std::abs(a.frame - b.frame)), params.tau0);
}

/// Per-cell nearest target under `transport_cost`, fixed for a given target
/// set. Every source cell sends all of its mass to exactly one atom.
class SourceAssignment {
public:
  static constexpr std::ptrdiff_t kNoTarget = -1;

  int n_frames() const noexcept { return n_frames_; }
  int n_pitches() const noexcept { return n_pitches_; }
  std::size_t n_cells() const noexcept { return target_.size(); }
  std::size_t n_atoms() const noexcept { return receivers_.size(); }

  /// Atom index receiving cell `i` (row-major linear index), or kNoTarget.
  std::ptrdiff_t target(std::size_t i) const { return target_[i]; }
  /// Realized transport cost of cell `i`.
  double cost(std::size_t i) const { return cost_[i]; }
  const std::vector<double>& costs() const noexcept { return cost_; }
  /// Cells assigned to atom `j`, in increasing linear index.
  const std::vector<std::size_t>& receivers(std::size_t j) const { return receivers_[j]; }

  friend bool operator==(const SourceAssignment&, const SourceAssignment&) = default;

private:
  friend SourceAssignment assign_sources(const TargetDistribution&, const Grid&,
                                         const CostParams&);

  int n_frames_ = 0;
  int n_pitches_ = 0;
  std::vector<std::ptrdiff_t> target_;
  std::vector<double> cost_;
  std::vector<std::vector<std::size_t>> receivers_;
};

inline void require_consistent(const TargetDistribution& targets, const Grid& grid) {
  if (targets.n_frames() != grid.n_frames() || targets.n_pitches() != grid.n_pitches())
    throw ShapeError("target distribution is " + std::to_string(targets.n_frames()) + "x" +
                     std::to_string(targets.n_pitches()) + ", grid is " +
                     std::to_string(grid.n_frames()) + "x" + std::to_string(grid.n_pitches()));
}

/// Resolves, for every grid cell, the target atom of minimum transport cost.
///
/// Cost ties go to the atom with the smaller uncapped same-pitch frame
/// distance, then the earlier target frame, then the lower pitch index, then
/// the lower atom index. A cell past the cap therefore stays with the nearest
/// atom of its row. With no atoms every cell is unassigned at cost tau1.
inline SourceAssignment assign_sources(const TargetDistribution& targets, const Grid& grid,
                                       const CostParams& params) {
  params.validate();
  require_consistent(targets, grid);

  SourceAssignment out;
  out.n_frames_ = grid.n_frames();
  out.n_pitches_ = grid.n_pitches();
  const std::size_t n_cells = grid.n_cells();
  out.target_.assign(n_cells, SourceAssignment::kNoTarget);
  out.cost_.assign(n_cells, params.tau1);
  out.receivers_.assign(targets.size(), {});
  if (targets.empty()) return out;

  const auto atoms = targets.atoms();
  auto before = [&](std::size_t a, std::size_t b) {
    if (atoms[a].frame != atoms[b].frame) return atoms[a].frame < atoms[b].frame;
    if (atoms[a].pitch != atoms[b].pitch) return atoms[a].pitch < atoms[b].pitch;
    return a < b;
  };

  // Atoms of each pitch row, ordered by frame.
  const auto F = static_cast<std::size_t>(grid.n_pitches());
  std::vector<std::vector<std::size_t>> by_row(F);
  std::size_t first_atom = 0;
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    by_row[static_cast<std::size_t>(atoms[j].pitch)].push_back(j);
    if (before(j, first_atom)) first_atom = j;
  }
  for (auto& row : by_row) std::sort(row.begin(), row.end(), before);

  for (int t = 0; t < grid.n_frames(); ++t) {
    for (std::size_t p = 0; p < F; ++p) {
      const std::size_t i = static_cast<std::size_t>(t) * F + p;
      const auto& row = by_row[p];
      std::size_t best = first_atom;
      double best_cost = params.tau1;
      if (!row.empty()) {
        // Every same-row atom beats every cross-row one, and the nearest
        // same-row atom is one of the two bracketing t.
        auto it = std::upper_bound(row.begin(), row.end(), t, [&](int frame, std::size_t j) {
          return frame < atoms[j].frame;
        });
        if (it == row.begin()) {
          best = *it;
        } else if (it == row.end()) {
          best = *(it - 1);
        } else {
          const int back = t - atoms[*(it - 1)].frame;
          const int ahead = atoms[*it].frame - t;
          best = back <= ahead ? *(it - 1) : *it;
        }
        best_cost = transport_cost({t, static_cast<int>(p)}, atoms[best].cell(), params);
      }
      out.target_[i] = static_cast<std::ptrdiff_t>(best);
      out.cost_[i] = best_cost;
      out.receivers_[best].push_back(i);
    }
  }
  return out;
}

namespace detail {

inline void require_assignment_shape(const MassDistribution& m, const SourceAssignment& a,
                                     const char* what) {
  if (m.rows() != static_cast<std::size_t>(a.n_frames()) ||
      m.cols() != static_cast<std::size_t>(a.n_pitches()))
    throw ShapeError(std::string(what) + ": prediction is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", assignment grid is " +
                     std::to_string(a.n_frames()) + "x" + std::to_string(a.n_pitches()));
}

inline void require_finite(const MassDistribution& m, const char* what) {
  for (double v : m.values())
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + ": non-finite prediction entry");
}

/// Receiver of atom `j` carrying the largest mass; ties prefer the cheaper
/// cell, then the lower linear index.
inline std::size_t argmax_receiver(const MassDistribution& m, const SourceAssignment& a,
                                   std::size_t j) {
  const auto& cells = a.receivers(j);
  std::size_t best = cells.front();
  for (std::size_t i : cells) {
    if (m[i] > m[best] || (m[i] == m[best] && a.cost(i) < a.cost(best))) best = i;
  }
  return best;
}

}  // namespace detail

/// Transport term: every cell's mass times its realized cost.
inline double ot_distance(const MassDistribution& m, const SourceAssignment& assignment) {
  detail::require_assignment_shape(m, assignment, "ot_distance");
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) total += m[i] * assignment.cost(i);
  return total;
}

/// Squared gap between each atom's mass and the largest mass it receives.
inline double mass_penalty(const MassDistribution& m, const SourceAssignment& assignment,
                           const TargetDistribution& targets) {
  detail::require_assignment_shape(m, assignment, "mass_penalty");
  if (targets.size() != assignment.n_atoms())
    throw ShapeError("mass_penalty: assignment was built for a different target set");
  double total = 0.0;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const double gap = targets[j].mass - m[detail::argmax_receiver(m, assignment, j)];
    total += gap * gap;
  }
  return total;
}

struct LossBreakdown {
  double transport = 0.0;
  double mass_penalty = 0.0;
  double total = 0.0;  ///< transport + lambda * mass_penalty
  Matrix<double> gradient;
};

/// Loss and gradient against a precomputed assignment. Use this form inside
/// optimization loops: the assignment depends only on targets and grid.
inline LossBreakdown ot_loss(const MassDistribution& m, const TargetDistribution& targets,
                             const SourceAssignment& assignment, const CostParams& params) {
  detail::require_assignment_shape(m, assignment, "ot_loss");
  detail::require_finite(m, "ot_loss");
  if (targets.size() != assignment.n_atoms())
    throw ShapeError("ot_loss: assignment was built for a different target set");

  LossBreakdown out;
  out.gradient = Matrix<double>(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) {
    out.transport += m[i] * assignment.cost(i);
    out.gradient[i] = assignment.cost(i);
  }
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const std::size_t i = detail::argmax_receiver(m, assignment, j);
    const double gap = targets[j].mass - m[i];
    out.mass_penalty += gap * gap;
    out.gradient[i] += params.lambda * -2.0 * gap;
  }
  out.total = out.transport + params.lambda * out.mass_penalty;
  return out;
}

inline LossBreakdown ot_loss(const MassDistribution& m, const TargetDistribution& targets,
                             const Grid& grid, const CostParams& params) {
  require_grid_shape(m, grid, "ot_loss");
  return ot_loss(m, targets, assign_sources(targets, grid, params), params);
}

struct TotalLoss {
  LossBreakdown onset;
  LossBreakdown offset;
  double total = 0.0;
};

/// Onset-head plus offset-head OT loss.
inline TotalLoss total_loss(const MassDistribution& m_on, const MassDistribution& m_off,
                            const TargetDistribution& tgt_on, const TargetDistribution& tgt_off,
                            const Grid& grid, const CostParams& params) {
  TotalLoss out;
  out.onset = ot_loss(m_on, tgt_on, grid, params);
  out.offset = ot_loss(m_off, tgt_off, grid, params);
  out.total = out.onset.total + out.offset.total;
  return out;
}

}  // namespace otroll

#endif  // OTROLL_OT_LOSS_HPP
