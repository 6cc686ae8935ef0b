#include "contcomm/liveness.hpp"

#include <iostream>

namespace contcomm::gateway {

nlohmann::json to_json(const HealthReport& r) {
  return {{"checks", r.checks},
          {"restarts", r.restarts},
          {"last_progress", r.last_progress},
          {"healthy", r.healthy},
          {"last_check", r.last_check == Timestamp{} ? nlohmann::json(nullptr) : nlohmann::json(format_iso8601(r.last_check))}};
}

LivenessMonitor::LivenessMonitor(Millis interval, std::function<std::uint64_t()> progress,
                                 std::function<void()> reopen, const Clock& clock)
    : interval_(interval), progress_(std::move(progress)), reopen_(std::move(reopen)), clock_(clock) {
  if (interval_ <= Millis{0}) throw Error(ErrorCode::InvalidArgument, "liveness interval must be positive");
  if (!progress_ || !reopen_) throw Error(ErrorCode::InvalidArgument, "liveness needs a probe and a reopen action");
}

LivenessMonitor::~LivenessMonitor() { stop(); }

HealthReport LivenessMonitor::check_once() {
  std::uint64_t now_progress = 0;
  bool probe_ok = true;
  try {
    now_progress = progress_();
  } catch (const std::exception& e) {
    std::clog << "liveness: probe failed: " << e.what() << '\n';
    probe_ok = false;
  }
  std::unique_lock lock(mu_);
  ++report_.checks;
  report_.last_check = clock_.now();
  const bool stalled = !probe_ok || (baseline_ && now_progress == report_.last_progress);
  baseline_ = true;
  report_.last_progress = now_progress;
  report_.healthy = !stalled;
  if (!stalled) return report_;
  ++report_.restarts;
  lock.unlock();
  try {
    reopen_();
  } catch (const std::exception& e) {
    std::clog << "liveness: reopen failed: " << e.what() << '\n';
  }
  return report();
}

void LivenessMonitor::start() {
  if (loop_.joinable()) return;
  loop_ = std::jthread([this](std::stop_token st) {
    std::mutex m;
    std::condition_variable_any cv;
    auto next = std::chrono::steady_clock::now() + interval_;
    while (true) {
      std::unique_lock lock(m);
      if (cv.wait_until(lock, st, next, [] { return false; }) || st.stop_requested()) return;
      lock.unlock();
      check_once();
      // fixed rate, not fixed delay, so slow checks do not stretch the period
      next += interval_;
    }
  });
}

void LivenessMonitor::stop() {
  if (!loop_.joinable()) return;
  loop_.request_stop();
  loop_.join();
}

HealthReport LivenessMonitor::report() const {
  std::lock_guard lock(mu_);
  return report_;
}

}  // namespace contcomm::gateway
