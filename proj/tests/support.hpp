#pragma once

// Shared helpers for the test binaries. Oracles live next to the tests that
// use them; only plumbing goes here.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "contcomm/common.hpp"
#include "contcomm/corpus.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return CONTCOMM_DATA_DIR; }
inline std::filesystem::path test_data_dir() { return CONTCOMM_TEST_DATA_DIR; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() / ("contcomm-" + tag + "-" + std::to_string(rng() % 1000000000));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline contcomm::Timestamp at(const std::string& iso) { return contcomm::parse_iso8601(iso); }

inline contcomm::corpus::TweetRecord record(std::string id, std::string text, const std::string& iso = "2021-09-01T12:00:00Z") {
  contcomm::corpus::TweetRecord r;
  r.id = std::move(id);
  r.lang = "en";
  r.created_at = at(iso);
  r.text = std::move(text);
  r.user_id = "u1";
  return r;
}

/// Yields `limit` records, then goes quiet without ending.
class StallingStream final : public contcomm::corpus::TweetStream {
 public:
  explicit StallingStream(std::size_t limit) : limit_(limit) {}
  std::optional<contcomm::corpus::TweetRecord> next() override {
    if (stats_.read == limit_) return std::nullopt;
    ++stats_.read;
    return record("s" + std::to_string(serial_++), "flood water rising");
  }
  const contcomm::corpus::StreamStats& stats() const override { return stats_; }

 private:
  inline static std::atomic<int> serial_{0};
  std::size_t limit_;
  contcomm::corpus::StreamStats stats_;
};

inline bool rel_close(double a, double b, double rel) {
  if (a == b) return true;
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace testing
