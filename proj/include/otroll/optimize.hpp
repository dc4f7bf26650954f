#ifndef OTROLL_OPTIMIZE_HPP
#define OTROLL_OPTIMIZE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "otroll/bce.hpp"
#include "otroll/decoder.hpp"
#include "otroll/errors.hpp"
#include "otroll/evaluator.hpp"
#include "otroll/grid.hpp"
#include "otroll/ot_loss.hpp"

// Projected gradient descent directly on the prediction matrices. Stands in
// for network training: any differentiable predictor receives the same
// gradient signal through the chain rule.

namespace otroll {

enum class InitKind { zeros, uniform, smeared, targets };
enum class LossKind { ot, bce };

struct OptimizeConfig {
  std::uint64_t seed = 42;
  std::size_t n_notes = 3;
  int n_frames = 40;
  int n_pitches = 12;
  int lowest_pitch = Grid::kDefaultLowestPitch;
  double frame_period_s = Grid::kDefaultFramePeriod;
  int min_gap_frames = 4;
  CostParams params;
  double step_size = 0.05;
  int max_iters = 5000;
  double loss_tolerance = 1e-3;
  InitKind init = InitKind::zeros;
  double smear_sigma = 2.0;  ///< frames, for InitKind::smeared
  LossKind loss = LossKind::ot;
  int bce_event_len = 2;

  Grid grid() const { return Grid(n_frames, n_pitches, frame_period_s, lowest_pitch); }

  void validate() const {
    if (!(step_size > 0.0)) throw ValidationError("optimize: step_size must be > 0");
    if (max_iters < 1) throw ValidationError("optimize: max_iters must be >= 1");
    if (!(loss_tolerance > 0.0)) throw ValidationError("optimize: loss_tolerance must be > 0");
    if (init == InitKind::smeared && !(smear_sigma > 0.0))
      throw ValidationError("optimize: smear sigma must be > 0");
    params.validate();
  }
};

struct OptimizeResult {
  NoteList truth;
  TargetDistribution onset_targets{1, 1};
  TargetDistribution offset_targets{1, 1};
  MassDistribution m_on;
  MassDistribution m_off;
  std::vector<double> trace;  ///< loss before the first step, then after each accepted step
  int iterations = 0;
  bool converged = false;
  double final_step = 0.0;
  NoteList decoded;
  EvalReport onset_report;
  EvalReport onset_offset_report;
};

/// Gaussian bumps of height 1 centred on each atom along its pitch row,
/// combined by max.
inline MassDistribution smeared_targets(const TargetDistribution& targets, const Grid& grid, double sigma) {
  MassDistribution m = grid.zeros();
  for (const auto& a : targets.atoms()) {
    for (int t = 0; t < grid.n_frames(); ++t) {
      const double d = t - a.frame;
      m(t, a.pitch) = std::max(m(t, a.pitch), std::exp(-d * d / (2.0 * sigma * sigma)));
    }
  }
  return m;
}

inline MassDistribution initial_prediction(InitKind init, const TargetDistribution& targets,
                                           const Grid& grid, double sigma, std::mt19937_64& rng) {
  switch (init) {
    case InitKind::zeros:
      return grid.zeros();
    case InitKind::uniform: {
      MassDistribution m = grid.zeros();
      for (double& v : m.values()) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      return m;
    }
    case InitKind::smeared:
      return smeared_targets(targets, grid, sigma);
    case InitKind::targets:
      return targets.indicator();
  }
  return grid.zeros();
}

/// Smallest, over the atoms, of the share of an atom's same-row catchment
/// mass held by its single largest frame. 1 means every note is one frame.
inline double min_peak_share(const MassDistribution& m, const TargetDistribution& targets,
                             const SourceAssignment& assignment) {
  double worst = 1.0;
  const auto F = static_cast<std::size_t>(assignment.n_pitches());
  for (std::size_t j = 0; j < targets.size(); ++j) {
    double sum = 0.0, peak = 0.0;
    for (std::size_t i : assignment.receivers(j)) {
      if (static_cast<int>(i % F) != targets[j].pitch) continue;
      sum += m[i];
      peak = std::max(peak, m[i]);
    }
    worst = std::min(worst, sum > 0.0 ? peak / sum : 0.0);
  }
  return worst;
}

/// Number of frames at or above `threshold` in each atom's same-row
/// catchment, one entry per atom.
inline std::vector<int> activation_widths(const MassDistribution& m, const TargetDistribution& targets,
                                          const SourceAssignment& assignment, double threshold = 0.5) {
  std::vector<int> widths(targets.size(), 0);
  const auto F = static_cast<std::size_t>(assignment.n_pitches());
  for (std::size_t j = 0; j < targets.size(); ++j)
    for (std::size_t i : assignment.receivers(j))
      if (static_cast<int>(i % F) == targets[j].pitch && m[i] >= threshold) ++widths[j];
  return widths;
}

inline OptimizeResult optimize(const OptimizeConfig& cfg) {
  cfg.validate();
  const Grid grid = cfg.grid();
  OptimizeResult res;
  res.truth = synth_notes(cfg.seed, cfg.n_notes, grid, cfg.min_gap_frames);
  res.onset_targets = quantize_events(res.truth, grid, EventKind::onset);
  res.offset_targets = quantize_events(res.truth, grid, EventKind::offset);

  const SourceAssignment on_assign = assign_sources(res.onset_targets, grid, cfg.params);
  const SourceAssignment off_assign = assign_sources(res.offset_targets, grid, cfg.params);
  const PianoRoll on_roll = pianoroll_target(res.truth, grid, EventKind::onset, cfg.bce_event_len);
  const PianoRoll off_roll = pianoroll_target(res.truth, grid, EventKind::offset, cfg.bce_event_len);

  struct Eval {
    double loss;
    Matrix<double> g_on, g_off;
  };
  auto evaluate = [&](const MassDistribution& on, const MassDistribution& off) -> Eval {
    if (cfg.loss == LossKind::ot) {
      auto a = ot_loss(on, res.onset_targets, on_assign, cfg.params);
      auto b = ot_loss(off, res.offset_targets, off_assign, cfg.params);
      return {a.total + b.total, std::move(a.gradient), std::move(b.gradient)};
    }
    auto a = bce_loss(on, on_roll);
    auto b = bce_loss(off, off_roll);
    return {a.total + b.total, std::move(a.gradient), std::move(b.gradient)};
  };

  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  res.m_on = initial_prediction(cfg.init, res.onset_targets, grid, cfg.smear_sigma, rng);
  res.m_off = initial_prediction(cfg.init, res.offset_targets, grid, cfg.smear_sigma, rng);

  Eval cur = evaluate(res.m_on, res.m_off);
  res.trace.push_back(cur.loss);
  double step = cfg.step_size;
  auto descend = [&](const MassDistribution& m, const Matrix<double>& g) {
    MassDistribution next = m;
    for (std::size_t i = 0; i < m.size(); ++i) next[i] = std::clamp(m[i] - step * g[i], 0.0, 1.0);
    return next;
  };

  while (cur.loss >= cfg.loss_tolerance && res.iterations < cfg.max_iters) {
    ++res.iterations;
    MassDistribution on = descend(res.m_on, cur.g_on);
    MassDistribution off = descend(res.m_off, cur.g_off);
    Eval next = evaluate(on, off);
    if (next.loss > cur.loss) {
      step *= 0.5;
      if (step < 1e-15) break;
      continue;
    }
    res.m_on = std::move(on);
    res.m_off = std::move(off);
    cur = std::move(next);
    res.trace.push_back(cur.loss);
  }
  res.converged = cur.loss < cfg.loss_tolerance;
  res.final_step = step;

  res.decoded = decode_notes(res.m_on, res.m_off, grid);
  MatchParams onset_only;
  MatchParams with_offsets;
  with_offsets.use_offsets = true;
  res.onset_report = match_notes(res.truth, res.decoded, onset_only);
  res.onset_offset_report = match_notes(res.truth, res.decoded, with_offsets);
  return res;
}

inline InitKind parse_init_kind(const std::string& s) {
  if (s == "zeros") return InitKind::zeros;
  if (s == "uniform") return InitKind::uniform;
  if (s == "smeared") return InitKind::smeared;
  if (s == "targets") return InitKind::targets;
  throw ValidationError("unknown init '" + s + "' (zeros|uniform|smeared|targets)");
}

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "ot") return LossKind::ot;
  if (s == "bce") return LossKind::bce;
  throw ValidationError("unknown loss '" + s + "' (ot|bce)");
}

}  // namespace otroll

#endif  // OTROLL_OPTIMIZE_HPP
