#pragma once

#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "contcomm/common.hpp"
#include "contcomm/geo.hpp"

namespace contcomm::relay {

/// A <tweet, topic> message with delivery metadata.
struct Envelope {
  std::string tweet_id;
  std::size_t topic = 0;
  GeoPoint location;
  Timestamp enqueued_at{};
  std::uint32_t attempt = 0;  // set by the broker on each delivery
  std::uint64_t offset = 0;   // position in the topic's partition

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

nlohmann::json to_json(const Envelope& e);
Envelope envelope_from_json(const nlohmann::json& j);

struct BrokerOptions {
  std::size_t topics = 1;
  /// Maximum entries a partition retains beyond the slowest group's
  /// committed offset; publish fails with QueueFull past it.
  std::size_t queue_capacity = 100000;
  Millis redelivery_timeout{30000};
  /// When set, partitions are append-only files `<dir>/topic-<t>.log` of
  /// `[u32 little-endian length][JSON envelope]` records and committed
  /// offsets go to `<dir>/offsets.log`; existing files are recovered.
  std::optional<std::filesystem::path> log_dir;
  bool fsync_on_ack = false;
};

/// A consumer's membership in a group. A join or leave by any member bumps
/// the group generation; stale members get RebalanceInProgress and rejoin.
struct Member {
  std::string group;
  std::size_t topic = 0;
  std::uint64_t id = 0;
  std::uint64_t generation = 0;
};

/// In-process broker: one partition per topic, consumer groups with
/// at-least-once delivery (unacknowledged deliveries come back after the
/// redelivery timeout with a higher attempt count).
class Broker {
 public:
  Broker(BrokerOptions options, const Clock& clock);
  ~Broker();
  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  /// Returns the assigned offset once the envelope is on the partition (and
  /// in its log file when durable). Throws BrokerStopped, QueueFull,
  /// InvalidTopic.
  std::uint64_t publish(Envelope env);

  /// Registers a member; a new group starts at the oldest
  /// retained offset. Throws
  /// UnknownTopic.
  Member join(const std::string& group, std::size_t topic);
  void leave(const Member& m);

  /// Next envelope for the member's group, waiting up to `wait` of real
  /// time. Expired in-flight deliveries are handed out first. Throws
  /// RebalanceInProgress for a stale member, BrokerStopped after stop().
  std::optional<Envelope> poll(const Member& m, Millis wait = Millis{0});

  /// Acknowledges one delivery; the committed offset advances over the
  /// contiguous acknowledged prefix. Unknown offsets are ignored.
  void ack(const Member& m, std::uint64_t offset);

  void stop();
  bool stopped() const;

  std::uint64_t end_offset(std::size_t topic) const;
  std::uint64_t committed(const std::string& group, std::size_t topic) const;
  std::size_t in_flight(const std::string& group, std::size_t topic) const;
  std::size_t topic_count() const { return options_.topics; }

 private:
  struct Delivery {
    Timestamp deadline;
    std::uint32_t attempt;
  };
  struct Group {
    std::uint64_t next = 0;       // next never-delivered offset
    std::uint64_t committed = 0;  // everything below is acknowledged
    std::map<std::uint64_t, Delivery> in_flight;
    std::set<std::uint64_t> acked;  // acknowledged above `committed`
    std::uint64_t generation = 0;
    std::set<std::uint64_t> members;
  };
  struct Partition {
    std::uint64_t base = 0;  // offset of entries[0]
    std::deque<Envelope> entries;
    std::map<std::string, Group> groups;
    std::FILE* log = nullptr;
  };

  void check_topic(std::size_t topic, ErrorCode code) const;
  void recover();
  void trim(Partition& p);
  void write_offset(const std::string& group, std::size_t topic, std::uint64_t committed);
  void sync(std::FILE* f) const;

  BrokerOptions options_;
  const Clock& clock_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Partition> partitions_;
  std::FILE* offsets_log_ = nullptr;
  std::uint64_t next_member_ = 1;
  bool stopped_ = false;
};

/// Topic -> [(tweet_id, location)] with idempotent append, so at-least-once
/// delivery leaves each tweet once per topic.
class TopicCollection {
 public:
  explicit TopicCollection(std::size_t topics) : items_(topics), seen_(topics) {}

  /// Returns false for a duplicate. Throws InvalidTopic.
  bool append(std::size_t topic, const std::string& tweet_id, const GeoPoint& where);
  std::vector<std::pair<std::string, GeoPoint>> items(std::size_t topic) const;
  std::size_t size(std::size_t topic) const;
  std::size_t topic_count() const { return items_.size(); }

 private:
  mutable std::mutex mu_;
  std::vector<std::vector<std::pair<std::string, GeoPoint>>> items_;
  std::vector<std::set<std::string>> seen_;
};

}  // namespace contcomm::relay
