#ifndef OTROLL_HARMONIC_MASK_HPP
#define OTROLL_HARMONIC_MASK_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "otroll/errors.hpp"
#include "otroll/matrix.hpp"

namespace otroll {

struct HarmonicMaskParams {
  int bins_per_octave = 48;
  int max_harmonic = 8;
  double tol_cents = 12.5;  ///< half a bin at 48 bins per octave
};

/// Additive attention bias over log-frequency bins: 0 where two bins are
/// harmonically related, `blocked()` (most negative finite T) elsewhere.
template <typename T = float>
class HarmonicMask {
public:
  static constexpr T blocked() noexcept { return std::numeric_limits<T>::lowest(); }

  HarmonicMask(Matrix<T> bias, HarmonicMaskParams params)
      : bias_(std::move(bias)), params_(params) {}

  std::size_t n_bins() const noexcept { return bias_.rows(); }
  const Matrix<T>& bias() const noexcept { return bias_; }
  const HarmonicMaskParams& params() const noexcept { return params_; }
  T operator()(std::size_t i, std::size_t j) const { return bias_(i, j); }
  bool related(std::size_t i, std::size_t j) const { return bias_(i, j) == T{0}; }

private:
  Matrix<T> bias_;
  HarmonicMaskParams params_;
};

/// True when a bin offset is within `tol_cents` of the interval of some
/// harmonic k <= max_harmonic (ratio k or 1/k).
inline bool harmonically_related(int bin_offset, const HarmonicMaskParams& p) {
  const double delta = std::abs(static_cast<double>(bin_offset));
  const double cents_per_bin = 1200.0 / p.bins_per_octave;
  for (int k = 1; k <= p.max_harmonic; ++k) {
    const double err_bins = std::abs(delta - p.bins_per_octave * std::log2(static_cast<double>(k)));
    if (err_bins * cents_per_bin <= p.tol_cents) return true;
  }
  return false;
}

template <typename T = float>
HarmonicMask<T> harmonic_mask(int n_bins, const HarmonicMaskParams& params = {}) {
  if (n_bins < 1) throw ValidationError("harmonic_mask: n_bins must be >= 1");
  if (params.bins_per_octave < 1) throw ValidationError("harmonic_mask: bins_per_octave must be >= 1");
  if (params.max_harmonic < 1) throw ValidationError("harmonic_mask: max_harmonic must be >= 1");
  if (!(params.tol_cents >= 0.0)) throw ValidationError("harmonic_mask: tol_cents must be >= 0");

  // The relation depends only on |i - j|.
  std::vector<bool> by_offset(static_cast<std::size_t>(n_bins));
  for (int d = 0; d < n_bins; ++d) by_offset[d] = harmonically_related(d, params);

  const auto n = static_cast<std::size_t>(n_bins);
  Matrix<T> bias(n, n, HarmonicMask<T>::blocked());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (by_offset[i > j ? i - j : j - i]) bias(i, j) = T{0};
  return HarmonicMask<T>(std::move(bias), params);
}

}  // namespace otroll

#endif  // OTROLL_HARMONIC_MASK_HPP
