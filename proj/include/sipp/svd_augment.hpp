#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "sipp/error.hpp"
#include "sipp/image.hpp"

namespace sipp {

using Matrix = Eigen::MatrixXd;

/// Energy fractions used by default: identity plus 95/90/85 percent.
inline constexpr std::array<double, 4> kDefaultEnergyFractions{1.0, 0.95, 0.90, 0.85};

/// Singular value decomposition of one image channel.
///
/// The decomposition is always taken of a tall matrix (rows >= cols); a wide
/// channel is transposed first and `transposed` records that so the
/// reconstruction can undo it. `u` holds the leading `cols` left singular
/// vectors (thin form), which is all a truncated reconstruction needs.
struct SvdChannel {
  Matrix u;
  Eigen::VectorXd sigma;
  Matrix v;
  bool transposed = false;

  std::size_t rank_limit() const noexcept { return static_cast<std::size_t>(sigma.size()); }
};

inline SvdChannel svd_decompose(const Matrix& channel) {
  if (channel.size() == 0) throw DataError("svd_decompose: empty matrix");
  if (!channel.allFinite()) throw DataError("svd_decompose: matrix has non-finite entries");

  SvdChannel out;
  out.transposed = channel.rows() < channel.cols();
  const Matrix tall = out.transposed ? Matrix(channel.transpose()) : channel;

  Eigen::BDCSVD<Matrix> svd(tall, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.u = svd.matrixU();
  out.sigma = svd.singularValues();
  out.v = svd.matrixV();
  return out;
}

/// Smallest k such that the first k squared singular values hold at least
/// `fraction` of the total squared energy.
inline std::size_t rank_for_energy(std::span<const double> sigma, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ParamError("energy fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  if (sigma.empty()) throw ParamError("rank_for_energy: empty singular value sequence");
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (!(sigma[i] >= 0.0) || !std::isfinite(sigma[i])) {
      throw ParamError("rank_for_energy: singular value " + std::to_string(i) + " is negative or non-finite");
    }
    if (i > 0 && sigma[i] > sigma[i - 1]) {
      throw ParamError("rank_for_energy: singular values must be non-increasing (index " + std::to_string(i) + ")");
    }
  }

  std::vector<double> cumulative(sigma.size());
  double running = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    running += sigma[i] * sigma[i];
    cumulative[i] = running;
  }
  const double total = cumulative.back();
  if (total == 0.0) throw ParamError("rank_for_energy: all singular values are zero");

  const double needed = fraction * total;
  for (std::size_t k = 0; k < cumulative.size(); ++k) {
    if (cumulative[k] >= needed) return k + 1;
  }
  return sigma.size();
}

inline std::size_t rank_for_energy(const SvdChannel& svd, double fraction) {
  return rank_for_energy(std::span<const double>(svd.sigma.data(), static_cast<std::size_t>(svd.sigma.size())),
                         fraction);
}

/// Rank-k reconstruction sum_{i<=k} sigma_i u_i v_i^T in the channel's
/// original orientation. No clamping or rounding happens here.
inline Matrix reconstruct_truncated(const SvdChannel& svd, std::size_t k) {
  if (k < 1 || k > svd.rank_limit()) {
    throw ParamError("reconstruct_truncated: k=" + std::to_string(k) + " outside [1, " +
                     std::to_string(svd.rank_limit()) + "]");
  }
  const auto kk = static_cast<Eigen::Index>(k);
  Matrix tall = svd.u.leftCols(kk) * svd.sigma.head(kk).asDiagonal() * svd.v.leftCols(kk).transpose();
  if (svd.transposed) return tall.transpose();
  return tall;
}

namespace detail {

inline Matrix plane_to_matrix(const ImageRGB& img, std::size_t c) {
  Matrix m(static_cast<Eigen::Index>(img.height()), static_cast<Eigen::Index>(img.width()));
  const auto& p = img.plane(c);
  for (std::size_t r = 0; r < img.height(); ++r) {
    for (std::size_t col = 0; col < img.width(); ++col) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) = p[r * img.width() + col];
    }
  }
  return m;
}

// Clamp to [0, 255] and round half-up.
inline std::uint8_t to_intensity(double v) noexcept {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::floor(v + 0.5));
}

inline ImageRGB::Plane matrix_to_plane(const Matrix& m) {
  ImageRGB::Plane p(static_cast<std::size_t>(m.size()));
  const auto cols = static_cast<std::size_t>(m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      p[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c)] = to_intensity(m(r, c));
    }
  }
  return p;
}

}  // namespace detail

/// Per-channel energy-truncated variants of `img`, one plane per fraction.
/// Fraction 1.0 copies the input plane verbatim.
inline std::array<std::vector<ImageRGB::Plane>, 3> truncated_planes(const ImageRGB& img,
                                                                    std::span<const double> fractions) {
  std::array<std::vector<ImageRGB::Plane>, 3> out;
  for (std::size_t c = 0; c < 3; ++c) {
    SvdChannel svd;
    bool decomposed = false;
    for (double f : fractions) {
      if (f == 1.0) {
        out[c].push_back(img.plane(c));
        continue;
      }
      if (!decomposed) {
        svd = svd_decompose(detail::plane_to_matrix(img, c));
        decomposed = true;
      }
      const double total = svd.sigma.squaredNorm();
      if (total == 0.0) {
        // An all-black channel has no energy to drop.
        out[c].push_back(img.plane(c));
        continue;
      }
      const std::size_t k = rank_for_energy(svd, f);
      out[c].push_back(detail::matrix_to_plane(reconstruct_truncated(svd, k)));
    }
  }
  return out;
}

/// All |fractions|^3 combinations merge(R_i, G_j, B_k), ordered with i
/// outermost and k innermost. With the default fractions this yields 64
/// images and index 0 is the input itself.
inline std::vector<ImageRGB> augment_image(const ImageRGB& img,
                                           std::span<const double> fractions = kDefaultEnergyFractions) {
  if (img.width() < 2 || img.height() < 2) {
    throw DataError("augment_image: image must be at least 2x2, got " + std::to_string(img.width()) + "x" +
                    std::to_string(img.height()));
  }
  if (fractions.empty()) throw ParamError("augment_image: no energy fractions given");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ParamError("energy fraction must lie in (0, 1], got " + std::to_string(f));
  }

  const auto planes = truncated_planes(img, fractions);
  const std::size_t n = fractions.size();
  std::vector<ImageRGB> out;
  out.reserve(n * n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        out.emplace_back(img.width(), img.height(),
                         std::array<ImageRGB::Plane, 3>{planes[0][i], planes[1][j], planes[2][k]});
      }
    }
  }
  return out;
}

}  // namespace sipp
