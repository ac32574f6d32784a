#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace testsupport {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hystlab_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-12) {
  return std::abs(a - b) <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

// Straight evaluation of each statistic from its definition, one pass per
// statistic, written without reference to the library code.
inline std::vector<double> brute_force_statistics(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> out;
  double mn = x[0], mx = x[0];
  for (double v : x) { if (v < mn) mn = v; if (v > mx) mx = v; }
  out.push_back(mn);
  out.push_back(mx);
  double amn = std::abs(x[0]), amx = std::abs(x[0]);
  for (double v : x) { amn = std::min(amn, std::abs(v)); amx = std::max(amx, std::abs(v)); }
  out.push_back(amn);
  out.push_back(amx);
  double sac = 0;
  for (std::size_t i = 1; i < n; ++i) sac += std::abs(x[i] - x[i - 1]);
  out.push_back(sac);
  long double ch = 0;
  for (std::size_t i = 1; i < n; ++i) ch += (long double)x[i] - x[i - 1];
  out.push_back(double(ch / (n - 1)));
  out.push_back(sac / double(n - 1));
  long double e = 0;
  for (double v : x) e += (long double)v * v;
  out.push_back(double(e));
  long double s = 0;
  for (double v : x) s += v;
  out.push_back(double(s));
  out.push_back(double(s / n));
  long double c = 0;
  for (std::size_t i = 1; i < n; ++i) c += (long double)(x[i] - x[i - 1]) * (x[i] - x[i - 1]);
  out.push_back(std::sqrt(double(c)));
  long double sp = 0, sn = 0;
  std::size_t np = 0, nn = 0, nz = 0;
  for (double v : x) {
    if (v > 0) { sp += v; ++np; }
    if (v < 0) { sn += v; ++nn; }
    if (v == 0) ++nz;
  }
  out.push_back(double(sp));
  out.push_back(double(sn));
  out.push_back(np ? double(sp / np) : 0.0);
  out.push_back(nn ? double(sn / nn) : 0.0);
  out.push_back(double(nz));
  out.push_back(std::sqrt(double(e / n)));
  out.push_back(x.front());
  out.push_back(x.back());
  return out;
}

}  // namespace testsupport
