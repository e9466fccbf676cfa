#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "sipp/error.hpp"
#include "sipp/version.hpp"

namespace sipp::cli {

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string() + " for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

/// Run record written next to a command's outputs: command line, every
/// option value (given or default), input digests and the tool version.
/// Contains nothing time- or host-dependent.
class Manifest {
 public:
  Manifest(const std::vector<std::string>& argv, const CLI::App& sub) {
    j_["tool"] = "sipp";
    j_["version"] = kVersion;
    j_["command"] = sub.get_name();
    j_["argv"] = argv;
    nlohmann::json params = nlohmann::json::object();
    for (const CLI::Option* opt : sub.get_options()) {
      const std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
      if (name == "help" || name == "manifest") continue;
      if (opt->count() > 0) {
        const auto& r = opt->results();
        if (opt->get_expected_max() == 0) {
          params[name] = true;
        } else if (r.size() == 1) {
          params[name] = r.front();
        } else {
          params[name] = r;
        }
      } else if (!opt->get_default_str().empty()) {
        params[name] = opt->get_default_str();
      } else if (opt->get_expected_max() == 0) {
        params[name] = false;
      }
    }
    j_["params"] = params;
    j_["inputs"] = nlohmann::json::array();
    j_["outputs"] = nlohmann::json::array();
  }

  void input(const std::filesystem::path& p) {
    j_["inputs"].push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  }
  void output(const std::filesystem::path& p) { j_["outputs"].push_back(p.string()); }
  nlohmann::json& extra() { return j_["result"]; }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << j_.dump(2) << '\n';
  }

 private:
  nlohmann::json j_;
};

}  // namespace sipp::cli
