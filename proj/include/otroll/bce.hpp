#ifndef OTROLL_BCE_HPP
#define OTROLL_BCE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "otroll/errors.hpp"
#include "otroll/grid.hpp"
#include "otroll/matrix.hpp"

namespace otroll {

/// Binary T x F' roll of note events.
using PianoRoll = Matrix<std::uint8_t>;

/// Marks `event_len_frames` frames from each quantized onset (or offset) at
/// the note's pitch, truncated at the end of the grid.
inline PianoRoll pianoroll_target(const NoteList& notes, const Grid& grid, EventKind which,
                                  int event_len_frames = 2) {
  if (event_len_frames < 1) throw ValidationError("pianoroll: event_len_frames must be >= 1");
  PianoRoll roll(static_cast<std::size_t>(grid.n_frames()),
                 static_cast<std::size_t>(grid.n_pitches()), 0);
  for (std::size_t i = 0; i < notes.size(); ++i) {
    const int p = pitch_index(notes[i], i, grid);
    bool clamped = false;
    const int q = quantize_time(event_time(notes[i], which), grid, clamped);
    const int end = std::min(q + event_len_frames, grid.n_frames());
    for (int t = q; t < end; ++t) roll(t, p) = 1;
  }
  return roll;
}

struct BceResult {
  double total = 0.0;
  Matrix<double> gradient;
};

inline constexpr double kBceClampEps = 1e-7;

/// Summed binary cross-entropy with predictions clamped to [eps, 1-eps].
/// The gradient is zero wherever the clamp is active.
inline BceResult bce_loss(const Matrix<double>& pred, const PianoRoll& target,
                          double eps = kBceClampEps) {
  require_same_shape(pred, target, "bce_loss");
  BceResult out;
  out.gradient = Matrix<double>(pred.rows(), pred.cols());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double raw = pred[i];
    const double y = target[i] ? 1.0 : 0.0;
    const double p = std::clamp(raw, eps, 1.0 - eps);
    out.total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    if (raw >= eps && raw <= 1.0 - eps) out.gradient[i] = (p - y) / (p * (1.0 - p));
  }
  return out;
}

}  // namespace otroll

#endif  // OTROLL_BCE_HPP
