#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "contcomm/communities.hpp"
#include "contcomm/geo.hpp"

namespace contcomm::gateway {

struct PipelineConfig {
  std::size_t k = 3;
  double eps_c = 0.5;
  double eps_l_km = communities::kDefaultRadiusKm;
  std::size_t min_pts = communities::kDefaultMinPts;
  Millis batch_interval{5000};
  std::size_t max_batch = 5000;
  Millis retrain_interval = std::chrono::hours(1);
  bool retrain_in_background = true;
  Millis liveness_interval{30000};
  Millis pin_retention = std::chrono::hours(24);
  Millis relink_window = std::chrono::hours(24);
  /// Records older than this (relative to the pipeline clock) leave the
  /// working graph; they stay in the tweets collection.
  Millis window = std::chrono::hours(24);
  std::uint64_t topic_seed = 1;
  std::uint64_t veracity_seed = 7;
  std::size_t olda_passes = 20;
  std::size_t olda_batch = 256;
  std::size_t max_features = 0;
  /// Fewest documents before a first topic model is trained.
  std::size_t min_train_docs = 10;

  std::string dictionary;  // file paths, empty = unused
  std::string gazetteer;
  std::string stopwords;
  std::string veracity_training;  // labeled TSV
  std::string veracity_model;     // JSON snapshot, wins over training
  std::string remote_classifier;  // endpoint URL; wins over both
  Millis remote_timeout{2000};
  bool remote_mark_unchecked = false;
  std::string source;  // path or "synthetic"
  std::uint64_t source_seed = 42;
  std::size_t source_count = 1000;
  double source_rate = 0.0;
  std::string dead_letter = "dead_letter.jsonl";
  std::string broker_log_dir;  // empty = in-memory partitions
  std::size_t store_shards = 4;
  int store_precision = 4;
  std::size_t store_replicas = 3;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t subscriber_queue = 256;
  bool gray_pins = true;

  /// Throws InvalidArgument naming the first bad field.
  void validate() const;
};

/// Unknown keys are rejected; absent keys keep their defaults.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& path);

struct BBox {
  double south = -90, west = -180, north = 90, east = 180;

  bool contains(const LatLon& p) const {
    return p.lat >= south && p.lat <= north && p.lon >= west && p.lon <= east;
  }
  /// Parses "south,west,north,east"; throws InvalidArgument.
  static BBox parse(std::string_view text);
  void validate() const;
};

struct Pin {
  std::string pin_id;
  std::size_t topic = 0;
  LatLon centroid;
  std::size_t member_count = 0;
  Timestamp last_updated{};
  std::string area_id;
  std::vector<std::string> member_ids;  // sorted
  double radius_km = 0.0;

  friend bool operator==(const Pin&, const Pin&) = default;
};

nlohmann::json to_json(const Pin& p);

struct PinEvent {
  enum class Type { Upsert, Removed } type = Type::Upsert;
  Pin pin;
  bool subscribed = true;  // false = shown gray to a non-subscriber
};

std::string_view event_name(PinEvent::Type t);
nlohmann::json to_json(const PinEvent& e);

/// Share of the larger member set held in common.
double overlap(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Live pins. Each pin is backed by one current community; a community
/// whose members overlap an existing pin of its topic by at least half
/// keeps that pin's id.
class PinBoard {
 public:
  /// Replaces the pins of `topic` with `current`. A pin's last_updated is
  /// the creation time of its newest member. Returns upsert events for new
  /// or changed pins and removal events for pins no longer backed.
  std::vector<PinEvent> apply(std::size_t topic, const std::vector<communities::CommunityGraph>& current);

  /// Removes pins with now - last_updated > retention.
  std::vector<PinEvent> expire(Timestamp now, Millis retention);

  /// Removes every pin of topics >= k (after a retrain shrinks k).
  std::vector<PinEvent> drop_topics_from(std::size_t k);

  std::vector<Pin> pins() const;
  std::optional<Pin> find(const std::string& pin_id) const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, Pin> pins_;
};

struct Subscription {
  std::string user_id;
  std::set<std::size_t> topics;
  std::optional<BBox> bbox;
  Timestamp created_at{};
};

nlohmann::json to_json(const Subscription& s);

/// Bounded per-user event queue. Overflow drops the consumer: the mailbox
/// closes and the client reconnects for a fresh snapshot.
class Mailbox {
 public:
  explicit Mailbox(std::size_t capacity) : capacity_(capacity) {}

  bool push(PinEvent e);
  /// Waits up to `wait`; nullopt on timeout or when closed and drained.
  std::optional<PinEvent> pop(Millis wait);
  void close();
  bool closed() const;
  bool overflowed() const;
  std::size_t pending() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<PinEvent> queue_;
  std::size_t capacity_;
  bool closed_ = false;
  bool overflowed_ = false;
};

/// Subscriptions and push fan-out. Tracks which pins each user currently
/// sees so removals reach exactly the users who saw the pin.
class SubscriptionHub {
 public:
  SubscriptionHub(std::size_t topic_count, std::size_t queue_capacity = 256, bool gray = false);

  /// Adds topics to the user's subscription (replacing the bbox when one is
  /// given). Throws UnknownTopic, InvalidArgument.
  Subscription subscribe(const std::string& user_id, const std::set<std::size_t>& topics,
                         const std::optional<BBox>& bbox, Timestamp now, const std::vector<Pin>& live = {});
  /// Pushes pin_removed for the user's visible pins of those topics. A user
  /// left with no topics is removed and its mailbox closed. Throws
  /// UnknownUser.
  void unsubscribe(const std::string& user_id, const std::set<std::size_t>& topics);

  /// Current mailbox of the user, reopened if it was dropped; a reopened
  /// mailbox starts with upserts for the live pins the user may see.
  std::shared_ptr<Mailbox> connect(const std::string& user_id, const std::vector<Pin>& live);

  void publish(const std::vector<PinEvent>& events);

  std::optional<Subscription> subscription(const std::string& user_id) const;
  std::vector<Subscription> subscriptions() const;
  void set_topic_count(std::size_t k);
  std::size_t topic_count() const;
  void close_all();

 private:
  struct User {
    Subscription sub;
    std::shared_ptr<Mailbox> mailbox;
    std::map<std::string, Pin> visible;  // as last sent
    bool attached = false;               // a stream has taken the mailbox
  };

  // Returns the event the user should get for `e`, if any, and updates
  // the visible set.
  std::optional<PinEvent> route(User& u, const PinEvent& e) const;
  void deliver(User& u, PinEvent e);

  mutable std::mutex mu_;
  std::size_t k_;
  std::size_t capacity_;
  bool gray_;
  std::map<std::string, User> users_;
};

}  // namespace contcomm::gateway
