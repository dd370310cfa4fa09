#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pam/common.hpp"

namespace pam {

using json = nlohmann::json;

#ifndef PAM_BUILD_ID
#define PAM_BUILD_ID "unversioned"
#endif

inline const char* build_id() { return PAM_BUILD_ID; }

/// Full round-trip formatting for doubles (17 significant digits).
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV writer: header row, UTF-8, LF line endings, 17-digit floats.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out_ << ',';
      out_ << header[i];
    }
    out_ << '\n';
  }

  CsvWriter& field(double v) {
    sep();
    out_ << fmt17(v);
    return *this;
  }
  CsvWriter& field(i64 v) {
    sep();
    out_ << v;
    return *this;
  }
  CsvWriter& field(const std::string& s) {
    sep();
    out_ << s;
    return *this;
  }
  CsvWriter& field(const Site& z, int d) {
    sep();
    for (int i = 0; i < d; ++i) {
      if (i) out_ << ' ';
      out_ << z[static_cast<std::size_t>(i)];
    }
    return *this;
  }
  void endrow() {
    out_ << '\n';
    first_ = true;
  }

 private:
  std::ofstream out_;
  bool first_ = true;
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }
};

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << '\n';
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  in >> j;
  return j;
}

/// Load a potential override map {"1,0": 3.5, ...} keyed by comma-joined
/// coordinates.
inline std::vector<std::pair<Site, double>> overrides_from_json(const json& j, int d) {
  std::vector<std::pair<Site, double>> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    Site z{};
    const std::string& key = it.key();
    std::size_t pos = 0;
    for (int i = 0; i < d; ++i) {
      std::size_t next = key.find(',', pos);
      z[static_cast<std::size_t>(i)] = std::stoll(key.substr(pos, next - pos));
      pos = (next == std::string::npos) ? key.size() : next + 1;
    }
    out.emplace_back(z, it.value().get<double>());
  }
  return out;
}

}  // namespace pam
