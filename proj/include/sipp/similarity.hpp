#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sipp/error.hpp"

namespace sipp {

/// Fixed-dimension real vector produced by an external feature extractor.
/// Storage is 32-bit; every component is finite.
class FeatureVector {
 public:
  FeatureVector() = default;

  explicit FeatureVector(std::vector<float> values) : values_(std::move(values)) {
    if (values_.empty()) {
      throw DataError("feature vector must have positive dimension");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw DataError("feature vector component " + std::to_string(i) + " is not finite");
      }
    }
  }

  FeatureVector(std::initializer_list<float> values) : FeatureVector(std::vector<float>(values)) {}

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }
  float operator[](std::size_t i) const noexcept { return values_[i]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::vector<float> values_;
};

namespace detail {

// Squared L2 distance accumulated in double. Four partial sums keep the
// dependency chain short; the summation order is fixed so results are
// reproducible.
inline double squared_distance_unchecked(const float* x, const float* y, std::size_t n) noexcept {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const double d0 = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    const double d1 = static_cast<double>(x[i + 1]) - static_cast<double>(y[i + 1]);
    const double d2 = static_cast<double>(x[i + 2]) - static_cast<double>(y[i + 2]);
    const double d3 = static_cast<double>(x[i + 3]) - static_cast<double>(y[i + 3]);
    a0 += d0 * d0;
    a1 += d1 * d1;
    a2 += d2 * d2;
    a3 += d3 * d3;
  }
  for (; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    a0 += d * d;
  }
  return (a0 + a1) + (a2 + a3);
}

inline void check_same_dim(std::size_t a, std::size_t b) {
  if (a != b) {
    throw DataError("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace detail

inline double euclidean_distance(std::span<const float> x, std::span<const float> y) {
  detail::check_same_dim(x.size(), y.size());
  return std::sqrt(detail::squared_distance_unchecked(x.data(), y.data(), x.size()));
}

inline double euclidean_distance(const FeatureVector& x, const FeatureVector& y) {
  return euclidean_distance(x.values(), y.values());
}

/// Maps a distance onto (0, 1]: 1 / (1 + d).
inline double similarity_score(double distance) {
  if (!std::isfinite(distance) || distance < 0.0) {
    throw ParamError("similarity_score: distance must be finite and non-negative, got " +
                     std::to_string(distance));
  }
  return 1.0 / (1.0 + distance);
}

// Hot-path variant for callers that already guarantee a valid distance.
inline double similarity_score_unchecked(double distance) noexcept { return 1.0 / (1.0 + distance); }

}  // namespace sipp
