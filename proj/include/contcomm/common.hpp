#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace contcomm {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
using Millis = std::chrono::milliseconds;

enum class ErrorCode {
  MalformedDictionary,
  EmptyDictionary,
  SourceUnavailable,
  MalformedRecord,
  EmptyCorpus,
  UnresolvedInput,
  UnknownNode,
  SingleClassCorpus,
  VocabularyMismatch,
  Timeout,
  BadResponse,
  InsufficientReference,
  TooFewClusters,
  BrokerStopped,
  QueueFull,
  InvalidTopic,
  UnknownTopic,
  RebalanceInProgress,
  ShardUnavailable,
  UnknownKey,
  QuorumLost,
  UnknownUser,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every recoverable failure surfaces as an Error carrying one of the codes
// above; callers switch on code() rather than on exception subtype.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override;
};

// Manually advanced clock for tests and deterministic replay.
class SimulatedClock final : public Clock {
 public:
  explicit SimulatedClock(Timestamp start = Timestamp{}) : now_(start.time_since_epoch().count()) {}

  Timestamp now() const override { return Timestamp{Millis{now_.load()}}; }
  void set(Timestamp t) { now_.store(t.time_since_epoch().count()); }
  void advance(Millis d) { now_.fetch_add(d.count()); }

 private:
  std::atomic<std::int64_t> now_;
};

/// Parses `YYYY-MM-DDTHH:MM:SS[.mmm](Z|±HH:MM)`; throws MalformedRecord.
Timestamp parse_iso8601(std::string_view text);
std::string format_iso8601(Timestamp t);

/// 64-bit FNV-1a, used for stable identifiers (area ids, fingerprints).
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull);
std::string hex64(std::uint64_t v);

std::string to_lower_ascii(std::string_view s);

}  // namespace contcomm
