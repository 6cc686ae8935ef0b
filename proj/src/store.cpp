#include "contcomm/store.hpp"

#include <fstream>
#include <mutex>
#include <regex>
#include <unordered_set>

namespace contcomm::relay {

namespace {

struct Op {
  enum class Kind { Put, Append } kind;
  std::string collection;
  std::string key;
  std::string field;
  std::string unique_id;
  Document doc;
};

struct Replica {
  bool up = true;
  std::uint64_t applied = 0;
  Store::State state;
  std::unordered_map<std::string, std::unordered_set<std::string>> appended;  // per (collection, key, field)

  bool has(const Op& op) const {
    auto it = appended.find(op.collection + '\x1f' + op.key + '\x1f' + op.field);
    return it != appended.end() && it->second.count(op.unique_id);
  }

  bool apply(const Op& op) {
    if (op.kind == Op::Kind::Put) {
      state[op.collection][op.key] = op.doc;
      return true;
    }
    auto& seen = appended[op.collection + '\x1f' + op.key + '\x1f' + op.field];
    if (!seen.insert(op.unique_id).second) return false;
    auto& doc = state[op.collection][op.key];
    if (!doc.is_object()) doc = Document::object();
    auto& arr = doc[op.field];
    if (!arr.is_array()) arr = Document::array();
    arr.push_back(op.doc);
    return true;
  }
};

}  // namespace

struct Store::Shard {
  mutable std::shared_mutex mu;
  std::vector<Replica> replicas;
  std::vector<Op> oplog;     // entries not yet applied everywhere
  std::uint64_t base = 0;    // oplog position of oplog[0]
  std::atomic<bool> available{true};
  std::size_t index = 0;

  std::uint64_t end() const { return base + oplog.size(); }

  std::size_t alive() const {
    std::size_t n = 0;
    for (const auto& r : replicas) n += r.up;
    return n;
  }

  void check_available() const {
    if (!available.load()) throw Error(ErrorCode::ShardUnavailable, "shard " + std::to_string(index));
  }

  const Replica& primary() const {
    for (const auto& r : replicas)
      if (r.up) return r;
    throw Error(ErrorCode::ShardUnavailable, "shard " + std::to_string(index) + " has no live replica");
  }

  bool write(Op op) {
    check_available();
    if (alive() * 2 <= replicas.size())
      throw Error(ErrorCode::QuorumLost, "shard " + std::to_string(index) + ": " + std::to_string(alive()) + " of " +
                                             std::to_string(replicas.size()) + " replicas up");
    if (op.kind == Op::Kind::Append && primary().has(op)) return false;
    bool changed = false;
    for (auto& r : replicas) {
      if (!r.up) continue;
      changed = r.apply(op);
    }
    oplog.push_back(std::move(op));
    for (auto& r : replicas)
      if (r.up) r.applied = end();
    if (alive() == replicas.size()) {
      base = end();
      oplog.clear();
    }
    return changed;
  }
};

Store::Store(StoreOptions options) : options_(options), router_(options.shards, options.precision) {
  if (options_.replicas == 0) throw Error(ErrorCode::InvalidArgument, "need at least one replica");
  for (std::size_t i = 0; i < router_.total_shards(); ++i) {
    auto s = std::make_unique<Shard>();
    s->index = i;
    s->replicas.resize(options_.replicas);
    shards_.push_back(std::move(s));
  }
}

Store::~Store() = default;

Store::Shard& Store::shard(std::size_t i) const {
  if (i >= shards_.size()) throw Error(ErrorCode::InvalidArgument, "no shard " + std::to_string(i));
  return *shards_[i];
}

void Store::put(const std::string& collection, const std::string& key, Document doc, const GeoPoint& where) {
  auto& s = shard(router_.shard_of(where));
  std::unique_lock lock(s.mu);
  s.write({Op::Kind::Put, collection, key, {}, {}, std::move(doc)});
}

bool Store::append_unique(const std::string& collection, const std::string& key, const std::string& field,
                          Document item, const std::string& unique_id, const GeoPoint& where) {
  auto& s = shard(router_.shard_of(where));
  std::unique_lock lock(s.mu);
  return s.write({Op::Kind::Append, collection, key, field, unique_id, std::move(item)});
}

std::optional<Document> Store::find(const std::string& collection, const std::string& key,
                                    const std::optional<GeoPoint>& hint) const {
  auto look = [&](const Shard& s) -> std::optional<Document> {
    std::shared_lock lock(s.mu);
    s.check_available();
    const auto& st = s.primary().state;
    auto c = st.find(collection);
    if (c == st.end()) return std::nullopt;
    auto d = c->second.find(key);
    if (d == c->second.end()) return std::nullopt;
    return d->second;
  };
  if (hint) return look(shard(router_.shard_of(*hint)));
  for (const auto& s : shards_)
    if (auto d = look(*s)) return d;
  return std::nullopt;
}

Document Store::get(const std::string& collection, const std::string& key, const std::optional<GeoPoint>& hint) const {
  auto d = find(collection, key, hint);
  if (!d) throw Error(ErrorCode::UnknownKey, collection + "/" + key);
  return std::move(*d);
}

std::size_t Store::count(const std::string& collection) const {
  std::size_t n = 0;
  for (auto c : shard_sizes(collection)) n += c;
  return n;
}

std::vector<std::size_t> Store::shard_sizes(const std::string& collection) const {
  std::vector<std::size_t> out;
  for (const auto& s : shards_) {
    std::shared_lock lock(s->mu);
    s->check_available();
    const auto& st = s->primary().state;
    auto c = st.find(collection);
    out.push_back(c == st.end() ? 0 : c->second.size());
  }
  return out;
}

void Store::for_each(const std::string& collection,
                     const std::function<void(const std::string&, const Document&)>& fn) const {
  for (const auto& s : shards_) {
    std::shared_lock lock(s->mu);
    s->check_available();
    const auto& st = s->primary().state;
    auto c = st.find(collection);
    if (c == st.end()) continue;
    for (const auto& [k, d] : c->second) fn(k, d);
  }
}

void Store::kill_replica(std::size_t shard_index, std::size_t replica) {
  auto& s = shard(shard_index);
  std::unique_lock lock(s.mu);
  if (replica >= s.replicas.size()) throw Error(ErrorCode::InvalidArgument, "no replica " + std::to_string(replica));
  s.replicas[replica].up = false;
}

void Store::recover_replica(std::size_t shard_index, std::size_t replica) {
  auto& s = shard(shard_index);
  std::unique_lock lock(s.mu);
  if (replica >= s.replicas.size()) throw Error(ErrorCode::InvalidArgument, "no replica " + std::to_string(replica));
  auto& r = s.replicas[replica];
  if (r.up) return;
  if (s.alive() == 0) throw Error(ErrorCode::ShardUnavailable, "no live replica to resync from");
  for (auto pos = r.applied; pos < s.end(); ++pos) r.apply(s.oplog[pos - s.base]);
  r.applied = s.end();
  r.up = true;
  if (s.alive() == s.replicas.size()) {
    s.base = s.end();
    s.oplog.clear();
  }
}

void Store::set_available(std::size_t shard_index, bool available) { shard(shard_index).available = available; }

ReplicaSetStatus Store::replicate(std::size_t shard_index) const {
  auto& s = shard(shard_index);
  std::shared_lock lock(s.mu);
  ReplicaSetStatus st;
  st.shard = shard_index;
  for (const auto& r : s.replicas) st.replicas.push_back({r.up, r.applied});
  st.oplog_end = s.end();
  st.writable = s.alive() * 2 > s.replicas.size();
  st.available = s.available.load();
  return st;
}

Store::State Store::replica_state(std::size_t shard_index, std::size_t replica) const {
  auto& s = shard(shard_index);
  std::shared_lock lock(s.mu);
  if (replica >= s.replicas.size()) throw Error(ErrorCode::InvalidArgument, "no replica " + std::to_string(replica));
  return s.replicas[replica].state;
}

void Store::snapshot(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& s : shards_) {
    std::shared_lock lock(s->mu);
    for (const auto& [collection, docs] : s->primary().state) {
      auto path = dir / (collection + "." + std::to_string(s->index) + ".jsonl");
      std::ofstream out(path, std::ios::trunc);
      if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
      for (const auto& [k, d] : docs) out << Document{{"key", k}, {"doc", d}}.dump() << '\n';
    }
  }
}

void Store::restore(const std::filesystem::path& dir) {
  static const std::regex name(R"((.+)\.(\d+)\.jsonl)");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const auto file = entry.path().filename().string();
    if (!std::regex_match(file, m, name)) continue;
    auto& s = shard(std::stoul(m[2].str()));
    std::ifstream in(entry.path());
    std::string line;
    std::unique_lock lock(s.mu);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = Document::parse(line);
      s.write({Op::Kind::Put, m[1].str(), j.at("key").get<std::string>(), {}, {}, j.at("doc")});
    }
  }
}

}  // namespace contcomm::relay
