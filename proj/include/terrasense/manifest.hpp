// Run manifests: a deterministic inventory of an output directory.
// No timestamps, no absolute paths — two runs of the same config must
// produce byte-identical manifests.
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "terrasense/common.hpp"

namespace terra {

struct Manifest {
  std::string tool;                 // subcommand that produced the directory
  std::uint64_t config_hash = 0;    // hash of the canonical config text
  std::vector<std::pair<std::string, std::string>> params;
  std::vector<std::pair<std::string, std::uint64_t>> files;  // rel path, hash

  void add_param(const std::string& k, const std::string& v) {
    params.emplace_back(k, v);
  }

  void add_param(const std::string& k, double v) {
    params.emplace_back(k, fmt_num(v));
  }

  void add_file(const std::filesystem::path& dir, const std::string& rel) {
    std::ifstream in(dir / rel, std::ios::binary);
    if (!in) throw ConfigError("manifest: missing artifact " + rel);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
      h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    files.emplace_back(rel, h);
  }

  void save(const std::filesystem::path& dir,
            const std::string& name = "manifest.txt") const {
    std::ofstream out(dir / name);
    if (!out) throw ConfigError("cannot write manifest in " + dir.string());
    out << "tool = " << tool << "\n";
    out << "config_hash = " << hex12(config_hash) << "\n";
    for (const auto& [k, v] : params) out << k << " = " << v << "\n";
    auto sorted = files;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [rel, h] : sorted)
      out << "file " << hex12(h) << " " << rel << "\n";
  }
};

// Content-addressed run directory: <root>/<label>-<hash prefix>.
inline std::filesystem::path run_dir(const std::filesystem::path& root,
                                     const std::string& label,
                                     std::uint64_t config_hash) {
  return root / (label + "-" + hex12(config_hash));
}

}  // namespace terra
