#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#ifdef SIPP_WITH_PNG
#include <png.h>
#endif

#include "sipp/error.hpp"
#include "sipp/image.hpp"

namespace sipp {

namespace detail {

inline std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// Next whitespace-delimited token of a netpbm header, skipping comments.
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!tok.empty()) break;
    } else {
      tok.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return tok;
}

inline std::size_t pnm_number(std::istream& in, const char* what) {
  const std::string tok = pnm_token(in);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw DataError(std::string("PNM header: bad ") + what + " '" + tok + "'");
  }
  return std::stoul(tok);
}

}  // namespace detail

/// Binary PPM (P6) or PGM (P5) with maxval 255. PGM is replicated to RGB.
inline ImageRGB read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  const std::string magic = detail::pnm_token(in);
  if (magic != "P6" && magic != "P5") throw DataError(path.string() + ": unsupported PNM type '" + magic + "'");
  const std::size_t width = detail::pnm_number(in, "width");
  const std::size_t height = detail::pnm_number(in, "height");
  const std::size_t maxval = detail::pnm_number(in, "maxval");
  if (maxval != 255) throw DataError(path.string() + ": only maxval 255 is supported");
  if (width == 0 || height == 0) throw DataError(path.string() + ": empty image");

  const std::size_t channels = magic == "P6" ? 3 : 1;
  std::vector<std::uint8_t> data(width * height * channels);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (static_cast<std::size_t>(in.gcount()) != data.size()) throw DataError(path.string() + ": truncated pixel data");
  if (channels == 1) return ImageRGB::from_gray(width, height, std::move(data));
  return ImageRGB::from_interleaved(width, height, data);
}

inline void write_ppm(const ImageRGB& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot create image " + path.string());
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  const auto rgb = img.interleaved();
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

#ifdef SIPP_WITH_PNG

inline ImageRGB read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw DataError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError(path.string() + ": " + msg);
  }
  return ImageRGB::from_interleaved(image.width, image.height, rgb);
}

inline void write_png(const ImageRGB& img, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  const auto rgb = img.interleaved();
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, rgb.data(), 0, nullptr)) {
    throw DataError(path.string() + ": " + image.message);
  }
}

#endif

inline bool png_supported() noexcept {
#ifdef SIPP_WITH_PNG
  return true;
#else
  return false;
#endif
}

/// Reads by extension: .ppm/.pgm/.pnm always, .png when built with libpng.
inline ImageRGB read_image(const std::filesystem::path& path) {
  const std::string ext = detail::lower_extension(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return read_pnm(path);
#ifdef SIPP_WITH_PNG
  if (ext == ".png") return read_png(path);
#endif
  throw DataError("unsupported image format '" + ext + "' for " + path.string());
}

// Outputs are always RGB, so .pgm is rejected; callers map it to .ppm.
inline void write_image(const ImageRGB& img, const std::filesystem::path& path) {
  const std::string ext = detail::lower_extension(path);
  if (ext == ".ppm" || ext == ".pnm") return write_ppm(img, path);
#ifdef SIPP_WITH_PNG
  if (ext == ".png") return write_png(img, path);
#endif
  throw DataError("unsupported image format '" + ext + "' for " + path.string());
}

}  // namespace sipp
