#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "elsa/corpus.hpp"

#ifndef ELSA_DATA_DIR
#define ELSA_DATA_DIR "data"
#endif

namespace test_support {

inline std::filesystem::path data_file(const std::string& name) {
  return std::filesystem::path(ELSA_DATA_DIR) / name;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("elsa-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
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

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Example over `text` with entities given as (start, end, type) and one target.
inline elsa::ElsaExample make_example(const std::string& id, const std::string& text,
                                      std::vector<std::tuple<int, int, elsa::EntityType>> entities,
                                      std::size_t target, elsa::Polarity polarity,
                                      std::vector<elsa::OpinionSpan> opinions = {}) {
  elsa::ElsaExample ex;
  ex.utterance = elsa::make_utterance(id, text);
  for (auto [s, e, t] : entities)
    ex.entities.push_back({{s, e}, t, elsa::span_surface(ex.utterance, {s, e})});
  ex.target = target;
  ex.polarity = polarity;
  ex.opinions = std::move(opinions);
  return ex;
}

}  // namespace test_support
