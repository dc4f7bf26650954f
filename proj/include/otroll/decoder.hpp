#ifndef OTROLL_DECODER_HPP
#define OTROLL_DECODER_HPP

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "otroll/errors.hpp"
#include "otroll/grid.hpp"
#include "otroll/matrix.hpp"

namespace otroll {

struct DecodeParams {
  double threshold = 0.5;
  int min_duration_frames = 1;
  int default_duration_frames = 80;  ///< used when no offset peak follows an onset

  void validate() const {
    if (!(threshold > 0.0 && threshold < 1.0))
      throw ValidationError("decode: threshold must lie in (0, 1)");
    if (min_duration_frames < 1 || default_duration_frames < 1)
      throw ValidationError("decode: durations must be >= 1 frame");
  }
};

struct Peak {
  int frame = 0;
  int pitch = 0;
  double value = 0.0;

  friend bool operator==(const Peak&, const Peak&) = default;
};

/// Local maxima along time within each pitch row that reach `threshold`.
/// A flat plateau yields one peak at its first frame. Sorted by (pitch, frame).
inline std::vector<Peak> pick_peaks(const MassDistribution& m, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ValidationError("pick_peaks: threshold must lie in (0, 1)");
  std::vector<Peak> peaks;
  const std::size_t T = m.rows();
  for (std::size_t p = 0; p < m.cols(); ++p) {
    for (std::size_t t = 0; t < T; ++t) {
      const double v = m(t, p);
      if (!(v >= threshold)) continue;
      if (t > 0 && !(v > m(t - 1, p))) continue;
      std::size_t end = t + 1;
      while (end < T && m(end, p) == v) ++end;
      if (end == T || m(end, p) < v)
        peaks.push_back({static_cast<int>(t), static_cast<int>(p), v});
    }
  }
  return peaks;
}

/// Notes from onset and offset activations.
///
/// Each onset peak ends at the first later offset peak of its pitch, cut back
/// to the next onset peak of that pitch and to `default_duration_frames`.
inline NoteList decode_notes(const MassDistribution& m_on, const MassDistribution& m_off,
                             const Grid& grid, const DecodeParams& params = {}) {
  params.validate();
  require_grid_shape(m_on, grid, "decode_notes onset");
  require_grid_shape(m_off, grid, "decode_notes offset");

  const auto on_peaks = pick_peaks(m_on, params.threshold);
  const auto off_peaks = pick_peaks(m_off, params.threshold);

  std::vector<std::vector<int>> offsets_by_pitch(static_cast<std::size_t>(grid.n_pitches()));
  for (const auto& pk : off_peaks) offsets_by_pitch[pk.pitch].push_back(pk.frame);

  std::vector<NoteEvent> notes;
  notes.reserve(on_peaks.size());
  for (std::size_t k = 0; k < on_peaks.size(); ++k) {
    const Peak& on = on_peaks[k];
    const bool has_next = k + 1 < on_peaks.size() && on_peaks[k + 1].pitch == on.pitch;

    int end = on.frame + params.default_duration_frames;
    const auto& offs = offsets_by_pitch[on.pitch];
    auto it = std::upper_bound(offs.begin(), offs.end(), on.frame);
    if (it != offs.end()) end = std::min(end, *it);
    if (has_next) end = std::min(end, on_peaks[k + 1].frame);
    end = std::max(end, on.frame + params.min_duration_frames);
    // Never overlap the next same-pitch note, even at the cost of min duration.
    if (has_next) end = std::min(end, on_peaks[k + 1].frame);

    notes.push_back({grid.frame_time(on.frame), grid.frame_time(end),
                     grid.lowest_pitch() + on.pitch, std::nullopt});
  }
  return NoteList(std::move(notes));
}

}  // namespace otroll

#endif  // OTROLL_DECODER_HPP
