#ifndef OTROLL_ORACLE_HPP
#define OTROLL_ORACLE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "otroll/errors.hpp"
#include "otroll/grid.hpp"
#include "otroll/matrix.hpp"
#include "otroll/ot_loss.hpp"

// Verification paths that deliberately avoid the fast code in ot_loss.hpp.

namespace otroll {

/// Central-difference gradient of the full OT loss, one cell at a time.
/// Perturbed entries may leave [0, 1].
inline Matrix<double> fd_gradient(const MassDistribution& m, const TargetDistribution& targets,
                                  const Grid& grid, const CostParams& params, double eps = 1e-4) {
  if (!(eps > 0.0)) throw ValidationError("fd_gradient: eps must be positive");
  require_grid_shape(m, grid, "fd_gradient");
  const SourceAssignment assignment = assign_sources(targets, grid, params);
  Matrix<double> grad(m.rows(), m.cols());
  MassDistribution probe = m;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double x = m[i];
    probe[i] = x + eps;
    const double up = ot_loss(probe, targets, assignment, params).total;
    probe[i] = x - eps;
    const double down = ot_loss(probe, targets, assignment, params).total;
    probe[i] = x;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

/// Transport term by scanning every atom for every cell. Shares no code with
/// assign_sources; agrees with ot_distance bit for bit.
inline double ot_distance_bruteforce(const MassDistribution& m, const TargetDistribution& targets,
                                     const Grid& grid, const CostParams& params) {
  require_grid_shape(m, grid, "ot_distance_bruteforce");
  const int F = grid.n_pitches();
  double total = 0.0;
  for (int t = 0; t < grid.n_frames(); ++t) {
    for (int f = 0; f < F; ++f) {
      double best = params.tau1;
      for (const TargetAtom& a : targets.atoms()) {
        double c = params.tau1;
        if (a.pitch == f) {
          const double dt = t > a.frame ? t - a.frame : a.frame - t;
          c = dt < params.tau0 ? dt : params.tau0;
        }
        if (c < best) best = c;
      }
      total += m(t, f) * best;
    }
  }
  return total;
}

/// Square cost matrix for a balanced unit-mass transport problem.
class AssignmentProblem {
public:
  explicit AssignmentProblem(Matrix<double> cost) : cost_(std::move(cost)) {
    if (cost_.rows() == 0 || cost_.rows() != cost_.cols())
      throw ShapeError("assignment problem: cost matrix must be square and non-empty");
    for (double v : cost_.values())
      if (!std::isfinite(v)) throw ValidationError("assignment problem: non-finite cost");
  }

  std::size_t size() const noexcept { return cost_.rows(); }
  const Matrix<double>& cost() const noexcept { return cost_; }

private:
  Matrix<double> cost_;
};

struct AssignmentSolution {
  std::vector<std::size_t> permutation;  ///< row i is matched to column permutation[i]
  double total_cost = 0.0;
};

/// Minimum-cost perfect matching (Hungarian method with potentials, O(n^3)).
inline AssignmentSolution hungarian_assignment(const AssignmentProblem& problem) {
  const std::size_t n = problem.size();
  const auto& a = problem.cost();
  constexpr double inf = std::numeric_limits<double>::infinity();

  // 1-based potentials; column 0 is a virtual root.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match_col(n + 1, 0), way(n + 1, 0);
  for (std::size_t row = 1; row <= n; ++row) {
    match_col[0] = row;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match_col[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  AssignmentSolution out;
  out.permutation.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) out.permutation[match_col[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) out.total_cost += a(i, out.permutation[i]);
  return out;
}

/// Random prediction in [0, 1) and up to `max_atoms` unit atoms on distinct
/// cells, reproducible from `seed`.
struct RandomInstance {
  Grid grid;
  TargetDistribution targets;
  MassDistribution m;
};

inline RandomInstance random_instance(std::uint64_t seed, int n_frames, int n_pitches,
                                      int max_atoms, double w = 1.0) {
  std::mt19937_64 rng(seed);
  Grid grid(n_frames, n_pitches);
  const std::size_t n_cells = grid.n_cells();
  const auto n_atoms = static_cast<std::size_t>(
      std::min<std::uint64_t>(rng() % (static_cast<std::uint64_t>(max_atoms) + 1), n_cells));
  std::vector<std::size_t> cells(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) cells[i] = i;
  for (std::size_t k = 0; k < n_atoms; ++k)
    std::swap(cells[k], cells[k + rng() % (n_cells - k)]);
  std::vector<TargetAtom> atoms;
  for (std::size_t k = 0; k < n_atoms; ++k)
    atoms.push_back({static_cast<int>(cells[k] / n_pitches), static_cast<int>(cells[k] % n_pitches), w});
  MassDistribution m = grid.zeros();
  for (double& v : m.values()) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return {grid, TargetDistribution(grid, std::move(atoms)), std::move(m)};
}

struct GradientCheck {
  double max_rel_error = 0.0;  ///< |analytic - fd| / max(1, |analytic|, |fd|)
  std::size_t n_checked = 0;
  std::size_t n_excluded = 0;  ///< cells within eps of an argmax tie
};

/// Compares the analytic OT gradient to central differences, skipping cells
/// whose perturbation by +-eps could change which receiver is the argmax.
inline GradientCheck check_gradient(const MassDistribution& m, const TargetDistribution& targets,
                                    const Grid& grid, const CostParams& params, double eps = 1e-4) {
  const SourceAssignment assignment = assign_sources(targets, grid, params);
  const Matrix<double> analytic = ot_loss(m, targets, assignment, params).gradient;
  const Matrix<double> numeric = fd_gradient(m, targets, grid, params, eps);
  GradientCheck out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::ptrdiff_t j = assignment.target(i);
    if (j != SourceAssignment::kNoTarget) {
      double rival = -std::numeric_limits<double>::infinity();
      for (std::size_t k : assignment.receivers(static_cast<std::size_t>(j)))
        if (k != i) rival = std::max(rival, m[k]);
      if (std::abs(m[i] - rival) <= eps) {
        ++out.n_excluded;
        continue;
      }
    }
    const double a = analytic[i], f = numeric[i];
    const double rel = std::abs(a - f) / std::max({1.0, std::abs(a), std::abs(f)});
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.n_checked;
  }
  return out;
}

}  // namespace otroll

#endif  // OTROLL_ORACLE_HPP
