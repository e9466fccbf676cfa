#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sipp/error.hpp"

namespace sipp {

enum class Channel : std::size_t { kRed = 0, kGreen = 1, kBlue = 2 };

/// 8-bit RGB image stored as three row-major planes of height x width.
class ImageRGB {
 public:
  using Plane = std::vector<std::uint8_t>;

  ImageRGB() = default;

  ImageRGB(std::size_t width, std::size_t height, std::array<Plane, 3> planes)
      : width_(width), height_(height), planes_(std::move(planes)) {
    if (width_ == 0 || height_ == 0) throw DataError("image dimensions must be positive");
    for (const auto& p : planes_) {
      if (p.size() != width_ * height_) {
        throw DataError("image plane size " + std::to_string(p.size()) + " does not match " +
                        std::to_string(width_) + "x" + std::to_string(height_));
      }
    }
  }

  // Grayscale input replicated into three identical channels.
  static ImageRGB from_gray(std::size_t width, std::size_t height, Plane gray) {
    Plane g = gray;
    Plane b = gray;
    return ImageRGB(width, height, {std::move(gray), std::move(g), std::move(b)});
  }

  // Interleaved RGBRGB... bytes.
  static ImageRGB from_interleaved(std::size_t width, std::size_t height, const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != width * height * 3) throw DataError("interleaved buffer size mismatch");
    std::array<Plane, 3> planes;
    for (auto& p : planes) p.resize(width * height);
    for (std::size_t i = 0; i < width * height; ++i) {
      planes[0][i] = rgb[3 * i];
      planes[1][i] = rgb[3 * i + 1];
      planes[2][i] = rgb[3 * i + 2];
    }
    return ImageRGB(width, height, std::move(planes));
  }

  std::vector<std::uint8_t> interleaved() const {
    std::vector<std::uint8_t> rgb(width_ * height_ * 3);
    for (std::size_t i = 0; i < width_ * height_; ++i) {
      rgb[3 * i] = planes_[0][i];
      rgb[3 * i + 1] = planes_[1][i];
      rgb[3 * i + 2] = planes_[2][i];
    }
    return rgb;
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  const Plane& plane(Channel c) const noexcept { return planes_[static_cast<std::size_t>(c)]; }
  const Plane& plane(std::size_t c) const noexcept { return planes_[c]; }
  std::uint8_t at(Channel c, std::size_t row, std::size_t col) const noexcept {
    return planes_[static_cast<std::size_t>(c)][row * width_ + col];
  }

  friend bool operator==(const ImageRGB&, const ImageRGB&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::array<Plane, 3> planes_;
};

}  // namespace sipp
