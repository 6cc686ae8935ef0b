#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "contcomm/common.hpp"

namespace contcomm::gateway {

struct HealthReport {
  std::uint64_t checks = 0;
  std::uint64_t restarts = 0;
  std::uint64_t last_progress = 0;
  bool healthy = true;  // the last check saw progress
  Timestamp last_check{};
};

nlohmann::json to_json(const HealthReport& r);

/// Periodic source watchdog. A check that finds the progress counter where
/// the previous check left it counts the source as stalled and reopens it.
/// The first check only records a baseline.
class LivenessMonitor {
 public:
  LivenessMonitor(Millis interval, std::function<std::uint64_t()> progress, std::function<void()> reopen,
                  const Clock& clock);
  ~LivenessMonitor();
  LivenessMonitor(const LivenessMonitor&) = delete;
  LivenessMonitor& operator=(const LivenessMonitor&) = delete;

  /// Never throws; a failing reopen is logged and still counted.
  HealthReport check_once();

  /// Checks every interval of real time on a background thread.
  void start();
  void stop();

  HealthReport report() const;
  Millis interval() const { return interval_; }

 private:
  Millis interval_;
  std::function<std::uint64_t()> progress_;
  std::function<void()> reopen_;
  const Clock& clock_;
  mutable std::mutex mu_;
  HealthReport report_;
  bool baseline_ = false;
  std::jthread loop_;
};

}  // namespace contcomm::gateway
