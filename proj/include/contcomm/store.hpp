#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "contcomm/geohash.hpp"

namespace contcomm::relay {

using Document = nlohmann::json;

struct StoreOptions {
  std::size_t shards = 4;
  int precision = geohash::kDefaultPrecision;
  /// Members per replica set; 1 disables replication.
  std::size_t replicas = 3;
};

struct ReplicaStatus {
  bool up = true;
  std::uint64_t applied = 0;  // oplog position
};

struct ReplicaSetStatus {
  std::size_t shard = 0;
  std::vector<ReplicaStatus> replicas;
  std::uint64_t oplog_end = 0;
  bool writable = true;   // majority up
  bool available = true;  // not fault-injected
};

/// Geo-sharded document store. Each shard is a replica set; an acknowledged
/// write has been applied to every live member. A document's key is assumed
/// to keep its location, so a key lives in exactly one shard.
class Store {
 public:
  /// collection -> key -> document
  using State = std::map<std::string, std::map<std::string, Document>>;

  explicit Store(StoreOptions options = {});
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const geohash::ShardRouter& router() const { return router_; }
  std::size_t shard_count() const { return router_.total_shards(); }

  /// Throws ShardUnavailable or QuorumLost; on return the write is durable
  /// on a majority.
  void put(const std::string& collection, const std::string& key, Document doc, const GeoPoint& where);

  /// Appends `item` to the array `field` of the document (created when
  /// missing) unless an element with the same `unique_id` was appended
  /// before. Returns whether it was added.
  bool append_unique(const std::string& collection, const std::string& key, const std::string& field, Document item,
                     const std::string& unique_id, const GeoPoint& where);

  /// Without a hint every shard is searched. Throws UnknownKey,
  /// ShardUnavailable.
  Document get(const std::string& collection, const std::string& key,
               const std::optional<GeoPoint>& hint = std::nullopt) const;
  std::optional<Document> find(const std::string& collection, const std::string& key,
                               const std::optional<GeoPoint>& hint = std::nullopt) const;

  std::size_t count(const std::string& collection) const;
  /// Visits documents shard by shard, keys ascending within a shard.
  void for_each(const std::string& collection,
                const std::function<void(const std::string&, const Document&)>& fn) const;
  std::vector<std::size_t> shard_sizes(const std::string& collection) const;

  // fault injection and replica management
  void kill_replica(std::size_t shard, std::size_t replica);
  /// Brings a member back and replays the oplog it missed.
  void recover_replica(std::size_t shard, std::size_t replica);
  void set_available(std::size_t shard, bool available);
  ReplicaSetStatus replicate(std::size_t shard) const;
  State replica_state(std::size_t shard, std::size_t replica) const;

  /// Writes `<collection>.<shard>.jsonl` files, one `{"key","doc"}` per line.
  void snapshot(const std::filesystem::path& dir) const;
  /// Loads every `<collection>.<shard>.jsonl` under `dir`.
  void restore(const std::filesystem::path& dir);

 private:
  struct Shard;
  Shard& shard(std::size_t i) const;

  StoreOptions options_;
  geohash::ShardRouter router_;
  std::vector<std::unique_ptr<Shard>> shards_;
};

}  // namespace contcomm::relay
