#pragma once

// Run manifests: every CLI run records its effective configuration, the seed,
// and an FNV-1a content hash of each input file, so outputs can be traced back
// to exact inputs. No timestamps — reruns on identical inputs are byte-stable.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace antispoof {

inline std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("manifest: cannot hash " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
    std::streamsize n = f.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!f) break;
  }
  return h;
}

class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t seed) {
    j_["command"] = std::move(command);
    j_["seed"] = seed;
    j_["inputs"] = nlohmann::json::object();
  }

  void set_config(const nlohmann::json& cfg) { j_["config"] = cfg; }

  void add_input(const std::filesystem::path& path) {
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a_file(path)));
    j_["inputs"][path.string()] = std::string("fnv1a:") + hex;
  }

  void write(const std::filesystem::path& path) const {
    std::filesystem::path dir = path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("manifest: cannot write " + path.string());
    f << j_.dump(2) << "\n";
  }

 private:
  nlohmann::json j_;
};

}  // namespace antispoof
