#ifndef OTROLL_GRID_HPP
#define OTROLL_GRID_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "otroll/errors.hpp"
#include "otroll/matrix.hpp"

namespace otroll {

/// Time-frequency lattice shared by predictions and targets.
///
/// Frame `t` covers the instant `t * frame_period_s`; pitch index `p`
/// corresponds to MIDI note `lowest_pitch + p`. The defaults describe a
/// 25 ms hop (1200 samples at 48 kHz) over the 88 piano keys A0..C8.
class Grid {
public:
  static constexpr double kDefaultFramePeriod = 0.025;
  static constexpr int kDefaultPitches = 88;
  static constexpr int kDefaultLowestPitch = 21;

  Grid(int n_frames, int n_pitches = kDefaultPitches,
       double frame_period_s = kDefaultFramePeriod,
       int lowest_pitch = kDefaultLowestPitch)
      : frame_period_s_(frame_period_s),
        n_frames_(n_frames),
        n_pitches_(n_pitches),
        lowest_pitch_(lowest_pitch) {
    if (!(frame_period_s > 0.0) || !std::isfinite(frame_period_s))
      throw ValidationError("grid: frame period must be positive");
    if (n_frames < 1) throw ValidationError("grid: n_frames must be >= 1");
    if (n_pitches < 1) throw ValidationError("grid: n_pitches must be >= 1");
    if (lowest_pitch < 0 || lowest_pitch + n_pitches - 1 > 127)
      throw ValidationError("grid: pitch range must lie within MIDI 0..127");
  }

  double frame_period_s() const noexcept { return frame_period_s_; }
  int n_frames() const noexcept { return n_frames_; }
  int n_pitches() const noexcept { return n_pitches_; }
  int lowest_pitch() const noexcept { return lowest_pitch_; }
  std::size_t n_cells() const noexcept {
    return static_cast<std::size_t>(n_frames_) * n_pitches_;
  }

  bool contains_pitch(int midi_pitch) const noexcept {
    return midi_pitch >= lowest_pitch_ && midi_pitch < lowest_pitch_ + n_pitches_;
  }

  /// Nearest frame to `time_s`, exact half frames rounding up. Not clamped.
  long long nearest_frame(double time_s) const noexcept {
    // The 1e-9 frame slack keeps decimal half-frame inputs such as 0.0375 s
    // (1.4999999999999998 frames in binary) on the round-up side.
    return static_cast<long long>(std::floor(time_s / frame_period_s_ + 0.5 + 1e-9));
  }

  double frame_time(int frame) const noexcept { return frame * frame_period_s_; }

  Matrix<double> zeros() const {
    return Matrix<double>(static_cast<std::size_t>(n_frames_),
                          static_cast<std::size_t>(n_pitches_), 0.0);
  }

  friend bool operator==(const Grid&, const Grid&) = default;

private:
  double frame_period_s_;
  int n_frames_;
  int n_pitches_;
  int lowest_pitch_;
};

/// A note as (onset, offset, pitch) with optional MIDI velocity.
struct NoteEvent {
  double onset_s = 0.0;
  double offset_s = 0.0;
  int pitch = 60;
  std::optional<int> velocity;

  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

inline void validate(const NoteEvent& note) {
  if (!std::isfinite(note.onset_s) || !std::isfinite(note.offset_s))
    throw ValidationError("note: non-finite time");
  if (note.onset_s < 0.0) throw ValidationError("note: negative onset");
  if (!(note.offset_s > note.onset_s))
    throw ValidationError("note: offset must be after onset");
  if (note.pitch < 0 || note.pitch > 127)
    throw ValidationError("note: pitch outside MIDI range");
  if (note.velocity && (*note.velocity < 1 || *note.velocity > 127))
    throw ValidationError("note: velocity outside 1..127");
}

/// Notes kept sorted by (onset, pitch); equal keys keep insertion order.
class NoteList {
public:
  NoteList() = default;
  explicit NoteList(std::vector<NoteEvent> notes) : notes_(std::move(notes)) {
    for (const auto& n : notes_) validate(n);
    std::stable_sort(notes_.begin(), notes_.end(),
                     [](const NoteEvent& a, const NoteEvent& b) {
                       if (a.onset_s != b.onset_s) return a.onset_s < b.onset_s;
                       return a.pitch < b.pitch;
                     });
  }

  std::size_t size() const noexcept { return notes_.size(); }
  bool empty() const noexcept { return notes_.empty(); }
  const NoteEvent& operator[](std::size_t i) const { return notes_[i]; }
  auto begin() const noexcept { return notes_.begin(); }
  auto end() const noexcept { return notes_.end(); }
  std::span<const NoteEvent> notes() const noexcept { return notes_; }

  friend bool operator==(const NoteList&, const NoteList&) = default;

private:
  std::vector<NoteEvent> notes_;
};

enum class EventKind { onset, offset };

inline double event_time(const NoteEvent& n, EventKind which) noexcept {
  return which == EventKind::onset ? n.onset_s : n.offset_s;
}

struct Cell {
  int frame = 0;
  int pitch = 0;  ///< pitch index within the grid, not a MIDI number

  friend bool operator==(const Cell&, const Cell&) = default;
};

struct TargetAtom {
  int frame = 0;
  int pitch = 0;
  double mass = 1.0;

  Cell cell() const noexcept { return {frame, pitch}; }
  friend bool operator==(const TargetAtom&, const TargetAtom&) = default;
};

/// Sparse point masses on a grid: at most one atom per cell, positive masses,
/// sorted by (frame, pitch).
class TargetDistribution {
public:
  TargetDistribution(int n_frames, int n_pitches) : n_frames_(n_frames), n_pitches_(n_pitches) {}

  TargetDistribution(int n_frames, int n_pitches, std::vector<TargetAtom> atoms,
                     std::size_t n_clamped = 0)
      : n_frames_(n_frames), n_pitches_(n_pitches), atoms_(std::move(atoms)),
        n_clamped_(n_clamped) {
    std::sort(atoms_.begin(), atoms_.end(), [](const TargetAtom& a, const TargetAtom& b) {
      return a.frame != b.frame ? a.frame < b.frame : a.pitch < b.pitch;
    });
    for (std::size_t j = 0; j < atoms_.size(); ++j) {
      const auto& a = atoms_[j];
      if (a.frame < 0 || a.frame >= n_frames_ || a.pitch < 0 || a.pitch >= n_pitches_)
        throw RangeError("target atom (" + std::to_string(a.frame) + ", " +
                         std::to_string(a.pitch) + ") outside the grid");
      if (!(a.mass > 0.0) || !std::isfinite(a.mass))
        throw ValidationError("target atom mass must be positive and finite");
      if (j > 0 && atoms_[j - 1].cell() == a.cell())
        throw ValidationError("two target atoms share cell (" + std::to_string(a.frame) +
                              ", " + std::to_string(a.pitch) + ")");
    }
  }

  TargetDistribution(const Grid& grid, std::vector<TargetAtom> atoms)
      : TargetDistribution(grid.n_frames(), grid.n_pitches(), std::move(atoms)) {}

  int n_frames() const noexcept { return n_frames_; }
  int n_pitches() const noexcept { return n_pitches_; }
  std::span<const TargetAtom> atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  bool empty() const noexcept { return atoms_.empty(); }
  const TargetAtom& operator[](std::size_t j) const { return atoms_[j]; }

  /// Number of events whose time fell past the last frame and was clamped.
  std::size_t n_clamped() const noexcept { return n_clamped_; }

  double total_mass() const noexcept {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.mass;
    return s;
  }

  /// Dense matrix with each atom's mass at its cell.
  Matrix<double> indicator() const {
    Matrix<double> m(static_cast<std::size_t>(n_frames_), static_cast<std::size_t>(n_pitches_));
    for (const auto& a : atoms_) m(a.frame, a.pitch) = a.mass;
    return m;
  }

  friend bool operator==(const TargetDistribution&, const TargetDistribution&) = default;

private:
  int n_frames_;
  int n_pitches_;
  std::vector<TargetAtom> atoms_;
  std::size_t n_clamped_ = 0;
};

/// Dense T x F' prediction. Model heads produce entries in [0, 1]; the loss
/// functions also accept values outside that range for finite-difference use.
using MassDistribution = Matrix<double>;

inline void require_unit_interval(const MassDistribution& m, const char* what) {
  for (double v : m.values()) {
    if (!(v >= 0.0 && v <= 1.0))
      throw ValidationError(std::string(what) + ": entries must lie in [0, 1]");
  }
}

inline void require_grid_shape(const Matrix<double>& m, const Grid& grid, const char* what) {
  if (m.rows() != static_cast<std::size_t>(grid.n_frames()) ||
      m.cols() != static_cast<std::size_t>(grid.n_pitches()))
    throw ShapeError(std::string(what) + ": matrix is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", grid is " +
                     std::to_string(grid.n_frames()) + "x" + std::to_string(grid.n_pitches()));
}

/// Frame of an event time on `grid`, clamped into [0, T-1]. Sets `clamped`
/// when the time lay past the last frame.
inline int quantize_time(double time_s, const Grid& grid, bool& clamped) {
  const long long f = grid.nearest_frame(time_s);
  clamped = f > grid.n_frames() - 1;
  return static_cast<int>(std::clamp<long long>(f, 0, grid.n_frames() - 1));
}

inline int pitch_index(const NoteEvent& note, std::size_t note_idx, const Grid& grid) {
  if (!grid.contains_pitch(note.pitch))
    throw RangeError("note " + std::to_string(note_idx) + " has pitch " +
                     std::to_string(note.pitch) + " outside grid range [" +
                     std::to_string(grid.lowest_pitch()) + ", " +
                     std::to_string(grid.lowest_pitch() + grid.n_pitches()) + ")");
  return note.pitch - grid.lowest_pitch();
}

/// Dirac target distribution of note onsets or offsets with per-note mass `w`.
///
/// Events landing on the same cell merge into one atom of mass `w`; masses do
/// not add, since a sigmoid-bounded prediction could never reach `2w`.
inline TargetDistribution quantize_events(const NoteList& notes, const Grid& grid,
                                          EventKind which, double w = 1.0) {
  if (!(w > 0.0) || !std::isfinite(w)) throw ValidationError("quantize: w must be positive");
  std::vector<TargetAtom> atoms;
  atoms.reserve(notes.size());
  std::size_t n_clamped = 0;
  for (std::size_t i = 0; i < notes.size(); ++i) {
    const int p = pitch_index(notes[i], i, grid);
    bool clamped = false;
    const int f = quantize_time(event_time(notes[i], which), grid, clamped);
    n_clamped += clamped ? 1 : 0;
    atoms.push_back({f, p, w});
  }
  std::sort(atoms.begin(), atoms.end(), [](const TargetAtom& a, const TargetAtom& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.pitch < b.pitch;
  });
  atoms.erase(std::unique(atoms.begin(), atoms.end(),
                          [](const TargetAtom& a, const TargetAtom& b) {
                            return a.cell() == b.cell();
                          }),
              atoms.end());
  return TargetDistribution(grid.n_frames(), grid.n_pitches(), std::move(atoms), n_clamped);
}

namespace detail {

inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  return n <= 1 ? 0 : rng() % n;
}

}  // namespace detail

/// Deterministic random notes aligned to frame boundaries.
///
/// Same-pitch onsets are at least `min_gap_frames` apart (and at least two,
/// so an offset frame fits strictly between them). Every offset lies within
/// the grid and strictly before the next same-pitch onset.
inline NoteList synth_notes(std::uint64_t seed, std::size_t n_notes, const Grid& grid,
                            int min_gap_frames = 4) {
  if (min_gap_frames < 1) throw ValidationError("synth: min_gap_frames must be >= 1");
  if (n_notes == 0) return NoteList{};

  const int gap = std::max(min_gap_frames, 2);
  const int last_onset = grid.n_frames() - 2;
  const std::size_t per_pitch = last_onset < 0 ? 0 : static_cast<std::size_t>(last_onset / gap + 1);
  const std::size_t capacity = per_pitch * static_cast<std::size_t>(grid.n_pitches());
  if (n_notes > capacity)
    throw CapacityError("synth: grid " + std::to_string(grid.n_frames()) + "x" +
                        std::to_string(grid.n_pitches()) + " holds at most " +
                        std::to_string(capacity) + " notes with gap " + std::to_string(gap) +
                        ", requested " + std::to_string(n_notes));

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> counts(static_cast<std::size_t>(grid.n_pitches()), 0);
  for (std::size_t placed = 0; placed < n_notes; ++placed) {
    std::vector<std::size_t> open;
    for (std::size_t p = 0; p < counts.size(); ++p)
      if (counts[p] < per_pitch) open.push_back(p);
    ++counts[open[detail::uniform_below(rng, open.size())]];
  }

  std::vector<NoteEvent> notes;
  notes.reserve(n_notes);
  for (std::size_t p = 0; p < counts.size(); ++p) {
    const std::size_t k = counts[p];
    if (k == 0) continue;
    // k sorted draws from [0, slack] spread by i*gap give gaps >= gap.
    const auto slack = static_cast<std::uint64_t>(last_onset) - (k - 1) * gap;
    std::vector<int> onsets(k);
    for (auto& o : onsets) o = static_cast<int>(detail::uniform_below(rng, slack + 1));
    std::sort(onsets.begin(), onsets.end());
    for (std::size_t i = 0; i < k; ++i) onsets[i] += static_cast<int>(i) * gap;

    for (std::size_t i = 0; i < k; ++i) {
      const int lo = onsets[i] + 1;
      const int hi = i + 1 < k ? onsets[i + 1] - 1 : grid.n_frames() - 1;
      const int off = lo + static_cast<int>(detail::uniform_below(rng, static_cast<std::uint64_t>(hi - lo + 1)));
      notes.push_back({grid.frame_time(onsets[i]), grid.frame_time(off),
                       grid.lowest_pitch() + static_cast<int>(p), std::nullopt});
    }
  }
  return NoteList(std::move(notes));
}

}  // namespace otroll

#endif  // OTROLL_GRID_HPP
