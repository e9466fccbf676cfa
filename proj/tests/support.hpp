#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "sipp/gallery.hpp"
#include "sipp/rng.hpp"
#include "sipp/similarity.hpp"

namespace sipp::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = info ? std::string(info->test_suite_name()) + "_" + info->name() : "sipp";
    for (char& c : name) {
      if (c == '/') c = '_';
    }
    path_ = std::filesystem::temp_directory_path() / ("sipp_test_" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline FeatureVector random_vector(Rng& rng, std::size_t dim, double scale = 1.0) {
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(scale * rng.normal());
  return FeatureVector(std::move(v));
}

inline std::string person_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%04zu", i);
  return buf;
}

// n random base entries, `per_person` images each.
inline std::vector<GalleryEntry> random_entries(Rng& rng, std::size_t n, std::size_t dim, std::size_t per_person = 1) {
  std::vector<GalleryEntry> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string person = person_name(i / per_person);
    out.push_back({person, person + "/" + std::to_string(i % per_person), Source::kBase, random_vector(rng, dim)});
  }
  return out;
}

inline Gallery random_gallery(std::uint64_t seed, std::size_t n, std::size_t dim, std::size_t per_person = 1) {
  Rng rng(seed);
  return build_gallery(random_entries(rng, n, dim, per_person), {});
}

inline std::vector<FeatureVector> random_queries(std::uint64_t seed, std::size_t n, std::size_t dim) {
  Rng rng(seed);
  std::vector<FeatureVector> q;
  q.reserve(n);
  for (std::size_t i = 0; i < n; ++i) q.push_back(random_vector(rng, dim));
  return q;
}

}  // namespace sipp::test
