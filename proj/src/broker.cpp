#include "contcomm/broker.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <fstream>

namespace contcomm::relay {

using nlohmann::json;

json to_json(const Envelope& e) {
  json j{{"tweet_id", e.tweet_id},
         {"topic", e.topic},
         {"source", std::string(to_string(e.location.source))},
         {"enqueued_at", e.enqueued_at.time_since_epoch().count()},
         {"offset", e.offset}};
  if (e.location.resolved()) {
    j["lat"] = e.location.lat;
    j["lon"] = e.location.lon;
  }
  return j;
}

Envelope envelope_from_json(const json& j) {
  Envelope e;
  e.tweet_id = j.at("tweet_id").get<std::string>();
  e.topic = j.at("topic").get<std::size_t>();
  e.location.source = geo_source_from_string(j.value("source", "unresolved"));
  if (e.location.resolved()) {
    e.location.lat = j.at("lat").get<double>();
    e.location.lon = j.at("lon").get<double>();
  }
  e.enqueued_at = Timestamp{Millis{j.at("enqueued_at").get<std::int64_t>()}};
  e.offset = j.value("offset", std::uint64_t{0});
  return e;
}

namespace {

std::FILE* open_append(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return f;
}

// Reads [u32 len][json] records; a torn tail is cut off.
std::deque<Envelope> read_partition(const std::filesystem::path& path) {
  std::deque<Envelope> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::uintmax_t good = 0;
  while (true) {
    std::array<unsigned char, 4> len_bytes{};
    if (!in.read(reinterpret_cast<char*>(len_bytes.data()), 4)) break;
    const std::uint32_t len = std::uint32_t(len_bytes[0]) | std::uint32_t(len_bytes[1]) << 8 |
                              std::uint32_t(len_bytes[2]) << 16 | std::uint32_t(len_bytes[3]) << 24;
    std::string body(len, '\0');
    if (!in.read(body.data(), len)) break;
    auto j = json::parse(body, nullptr, false);
    if (j.is_discarded()) break;
    try {
      out.push_back(envelope_from_json(j));
    } catch (const std::exception&) {
      break;
    }
    good += 4 + len;
  }
  in.close();
  if (std::filesystem::file_size(path) != good) std::filesystem::resize_file(path, good);
  return out;
}

}  // namespace

Broker::Broker(BrokerOptions options, const Clock& clock)
    : options_(std::move(options)), clock_(clock), partitions_(options_.topics) {
  if (options_.topics == 0) throw Error(ErrorCode::InvalidArgument, "broker needs at least one topic");
  if (options_.queue_capacity == 0) throw Error(ErrorCode::InvalidArgument, "queue capacity must be positive");
  if (options_.log_dir) recover();
}

Broker::~Broker() {
  for (auto& p : partitions_)
    if (p.log) std::fclose(p.log);
  if (offsets_log_) std::fclose(offsets_log_);
}

void Broker::recover() {
  const auto& dir = *options_.log_dir;
  std::filesystem::create_directories(dir);
  for (std::size_t t = 0; t < partitions_.size(); ++t) {
    const auto path = dir / ("topic-" + std::to_string(t) + ".log");
    if (std::filesystem::exists(path)) {
      partitions_[t].entries = read_partition(path);
      for (std::size_t i = 0; i < partitions_[t].entries.size(); ++i) partitions_[t].entries[i].offset = i;
    }
    partitions_[t].log = open_append(path);
  }
  const auto offsets = dir / "offsets.log";
  if (std::ifstream in(offsets); in) {
    std::string line;
    while (std::getline(in, line)) {
      auto j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) continue;  // torn last line
      const auto t = j.value("topic", std::size_t{0});
      if (t >= partitions_.size()) continue;
      auto& g = partitions_[t].groups[j.value("group", "")];
      g.committed = g.next = std::max(g.committed, j.value("committed", std::uint64_t{0}));
    }
  }
  offsets_log_ = open_append(offsets);
  for (auto& p : partitions_) trim(p);
}

void Broker::sync(std::FILE* f) const {
  std::fflush(f);
  if (options_.fsync_on_ack) ::fsync(fileno(f));
}

void Broker::check_topic(std::size_t topic, ErrorCode code) const {
  if (topic >= partitions_.size())
    throw Error(code, "topic " + std::to_string(topic) + " (broker has " + std::to_string(partitions_.size()) + ")");
}

std::uint64_t Broker::publish(Envelope env) {
  std::lock_guard lock(mu_);
  if (stopped_) throw Error(ErrorCode::BrokerStopped, "publish after stop");
  check_topic(env.topic, ErrorCode::InvalidTopic);
  auto& p = partitions_[env.topic];
  if (p.entries.size() >= options_.queue_capacity)
    throw Error(ErrorCode::QueueFull, "topic " + std::to_string(env.topic) + " holds " +
                                          std::to_string(p.entries.size()) + " unconsumed envelopes");
  env.offset = p.base + p.entries.size();
  env.attempt = 0;
  if (env.enqueued_at == Timestamp{}) env.enqueued_at = clock_.now();
  if (p.log) {
    const auto body = to_json(env).dump();
    const auto len = static_cast<std::uint32_t>(body.size());
    const unsigned char hdr[4] = {static_cast<unsigned char>(len), static_cast<unsigned char>(len >> 8),
                                  static_cast<unsigned char>(len >> 16), static_cast<unsigned char>(len >> 24)};
    if (std::fwrite(hdr, 1, 4, p.log) != 4 || std::fwrite(body.data(), 1, body.size(), p.log) != body.size())
      throw Error(ErrorCode::Io, "partition log write failed");
    sync(p.log);
  }
  p.entries.push_back(env);
  cv_.notify_all();
  return env.offset;
}

Member Broker::join(const std::string& group, std::size_t topic) {
  std::lock_guard lock(mu_);
  check_topic(topic, ErrorCode::UnknownTopic);
  auto& p = partitions_[topic];
  auto [it, fresh] = p.groups.try_emplace(group);
  if (fresh) it->second.next = it->second.committed = p.base;
  auto& g = it->second;
  ++g.generation;
  const auto id = next_member_++;
  g.members.insert(id);
  return {group, topic, id, g.generation};
}

void Broker::leave(const Member& m) {
  std::lock_guard lock(mu_);
  check_topic(m.topic, ErrorCode::UnknownTopic);
  auto& groups = partitions_[m.topic].groups;
  auto it = groups.find(m.group);
  if (it == groups.end() || !it->second.members.erase(m.id)) return;
  ++it->second.generation;
}

std::optional<Envelope> Broker::poll(const Member& m, Millis wait) {
  std::unique_lock lock(mu_);
  check_topic(m.topic, ErrorCode::UnknownTopic);
  const auto give_up = std::chrono::steady_clock::now() + wait;
  while (true) {
    if (stopped_) throw Error(ErrorCode::BrokerStopped, "poll after stop");
    auto& p = partitions_[m.topic];
    auto git = p.groups.find(m.group);
    if (git == p.groups.end() || !git->second.members.count(m.id) || git->second.generation != m.generation)
      throw Error(ErrorCode::RebalanceInProgress, "member " + std::to_string(m.id) + " of " + m.group + " must rejoin");
    auto& g = git->second;
    const auto now = clock_.now();
    for (auto& [off, d] : g.in_flight) {
      if (d.deadline > now) continue;
      ++d.attempt;
      d.deadline = now + options_.redelivery_timeout;
      Envelope e = p.entries[off - p.base];
      e.attempt = d.attempt;
      return e;
    }
    if (g.next < p.base + p.entries.size()) {
      const auto off = g.next++;
      g.in_flight[off] = {now + options_.redelivery_timeout, 1};
      Envelope e = p.entries[off - p.base];
      e.attempt = 1;
      return e;
    }
    if (wait <= Millis{0}) return std::nullopt;
    if (cv_.wait_until(lock, give_up) == std::cv_status::timeout) wait = Millis{0};  // one last look
  }
}

void Broker::ack(const Member& m, std::uint64_t offset) {
  std::lock_guard lock(mu_);
  check_topic(m.topic, ErrorCode::UnknownTopic);
  auto& p = partitions_[m.topic];
  auto git = p.groups.find(m.group);
  if (git == p.groups.end()) return;
  auto& g = git->second;
  if (!g.in_flight.erase(offset)) return;
  g.acked.insert(offset);
  const auto before = g.committed;
  while (!g.acked.empty() && *g.acked.begin() == g.committed) {
    g.acked.erase(g.acked.begin());
    ++g.committed;
  }
  if (g.committed != before) {
    write_offset(m.group, m.topic, g.committed);
    trim(p);
  }
}

void Broker::write_offset(const std::string& group, std::size_t topic, std::uint64_t committed) {
  if (!offsets_log_) return;
  const auto line = json{{"group", group}, {"topic", topic}, {"committed", committed}}.dump() + "\n";
  std::fwrite(line.data(), 1, line.size(), offsets_log_);
  sync(offsets_log_);
}

void Broker::trim(Partition& p) {
  if (p.groups.empty()) return;
  std::uint64_t low = UINT64_MAX;
  for (const auto& [_, g] : p.groups) low = std::min(low, g.committed);
  while (p.base < low && !p.entries.empty()) {
    p.entries.pop_front();
    ++p.base;
  }
}

void Broker::stop() {
  std::lock_guard lock(mu_);
  stopped_ = true;
  cv_.notify_all();
}

bool Broker::stopped() const {
  std::lock_guard lock(mu_);
  return stopped_;
}

std::uint64_t Broker::end_offset(std::size_t topic) const {
  std::lock_guard lock(mu_);
  check_topic(topic, ErrorCode::UnknownTopic);
  return partitions_[topic].base + partitions_[topic].entries.size();
}

std::uint64_t Broker::committed(const std::string& group, std::size_t topic) const {
  std::lock_guard lock(mu_);
  check_topic(topic, ErrorCode::UnknownTopic);
  auto it = partitions_[topic].groups.find(group);
  return it == partitions_[topic].groups.end() ? 0 : it->second.committed;
}

std::size_t Broker::in_flight(const std::string& group, std::size_t topic) const {
  std::lock_guard lock(mu_);
  check_topic(topic, ErrorCode::UnknownTopic);
  auto it = partitions_[topic].groups.find(group);
  return it == partitions_[topic].groups.end() ? 0 : it->second.in_flight.size();
}

bool TopicCollection::append(std::size_t topic, const std::string& tweet_id, const GeoPoint& where) {
  std::lock_guard lock(mu_);
  if (topic >= items_.size()) throw Error(ErrorCode::InvalidTopic, "topic " + std::to_string(topic));
  if (!seen_[topic].insert(tweet_id).second) return false;
  items_[topic].emplace_back(tweet_id, where);
  return true;
}

std::vector<std::pair<std::string, GeoPoint>> TopicCollection::items(std::size_t topic) const {
  std::lock_guard lock(mu_);
  if (topic >= items_.size()) throw Error(ErrorCode::InvalidTopic, "topic " + std::to_string(topic));
  return items_[topic];
}

std::size_t TopicCollection::size(std::size_t topic) const {
  std::lock_guard lock(mu_);
  if (topic >= items_.size()) throw Error(ErrorCode::InvalidTopic, "topic " + std::to_string(topic));
  return items_[topic].size();
}

}  // namespace contcomm::relay
