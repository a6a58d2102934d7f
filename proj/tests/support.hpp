#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include <gtest/gtest.h>

#include "vigil/corpus.hpp"
#include "vigil/eval.hpp"
#include "vigil/imaging.hpp"

namespace vigil::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "vigil") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
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

inline Frame random_frame(int w, int h, SplitMix64& rng) {
  Frame f(w, h);
  for (auto& p : f.pixels())
    p = {static_cast<std::uint8_t>(rng.uniform(255)), static_cast<std::uint8_t>(rng.uniform(255)),
         static_cast<std::uint8_t>(rng.uniform(255))};
  return f;
}

inline GrayFrame random_gray(int w, int h, SplitMix64& rng) {
  GrayFrame g(w, h);
  for (auto& p : g.pixels()) p = static_cast<std::uint8_t>(rng.uniform(255));
  return g;
}

inline BitMask random_mask(int w, int h, double density, SplitMix64& rng) {
  BitMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (rng.uniform_real() < density) m.set(x, y);
  return m;
}

/// A small corpus shared by every test in the process.
inline const Manifest& shared_corpus() {
  static TempDir dir("vigil-corpus");
  static const Manifest m = [] {
    corpus::CorpusOptions opt;
    opt.scenes = 40;
    opt.seed = 7;
    return corpus::generate_corpus(dir.path(), opt);
  }();
  return m;
}

}  // namespace vigil::testing
