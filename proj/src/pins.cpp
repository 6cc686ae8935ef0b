#include <algorithm>

#include "contcomm/gateway.hpp"

namespace contcomm::gateway {

using nlohmann::json;

BBox BBox::parse(std::string_view text) {
  double v[4];
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    const auto comma = text.find(',', pos);
    if ((i < 3) != (comma != std::string_view::npos))
      throw Error(ErrorCode::InvalidArgument, "bbox wants south,west,north,east");
    const auto part = text.substr(pos, i < 3 ? comma - pos : std::string_view::npos);
    std::string s(part);
    char* end = nullptr;
    v[i] = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw Error(ErrorCode::InvalidArgument, "bad bbox number '" + s + "'");
    pos = comma + 1;
  }
  BBox b{v[0], v[1], v[2], v[3]};
  b.validate();
  return b;
}

void BBox::validate() const {
  if (!valid_latlon(south, west) || !valid_latlon(north, east))
    throw Error(ErrorCode::InvalidArgument, "bbox corner out of range");
  if (south > north || west > east)
    throw Error(ErrorCode::InvalidArgument, "bbox corners must be ordered south-west, north-east");
}

json to_json(const Pin& p) {
  return {{"pin_id", p.pin_id},
          {"topic", p.topic},
          {"lat", p.centroid.lat},
          {"lon", p.centroid.lon},
          {"member_count", p.member_count},
          {"last_updated", format_iso8601(p.last_updated)},
          {"area_id", p.area_id},
          {"radius_km", p.radius_km}};
}

std::string_view event_name(PinEvent::Type t) {
  return t == PinEvent::Type::Upsert ? "pin_upsert" : "pin_removed";
}

json to_json(const PinEvent& e) {
  auto j = to_json(e.pin);
  j["type"] = std::string(event_name(e.type));
  j["subscribed"] = e.subscribed;
  return j;
}

json to_json(const Subscription& s) {
  json j{{"user_id", s.user_id}, {"topics", s.topics}, {"created_at", format_iso8601(s.created_at)}};
  if (s.bbox) j["bbox"] = {s.bbox->south, s.bbox->west, s.bbox->north, s.bbox->east};
  return j;
}

double overlap(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (auto i = a.begin(), j = b.begin(); i != a.end() && j != b.end();) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++common, ++i, ++j;
    }
  }
  return double(common) / double(std::max(a.size(), b.size()));
}

namespace {

Pin pin_for(const communities::CommunityGraph& c) {
  Pin p;
  p.topic = c.topic;
  p.centroid = c.centroid;
  p.member_count = c.cluster.member_ids.size();
  p.area_id = c.area_id;
  p.member_ids = c.cluster.member_ids;
  p.radius_km = c.radius_km;
  for (const auto& id : p.member_ids)
    if (c.graph.contains(id)) p.last_updated = std::max(p.last_updated, c.graph.node(id).created_at);
  return p;
}

}  // namespace

std::vector<PinEvent> PinBoard::apply(std::size_t topic, const std::vector<communities::CommunityGraph>& current) {
  std::lock_guard lock(mu_);
  std::vector<std::string> old_ids;
  for (const auto& [id, p] : pins_)
    if (p.topic == topic) old_ids.push_back(id);

  std::set<std::string> claimed;
  std::map<std::string, Pin> next;
  std::vector<PinEvent> events;
  for (const auto& c : current) {
    if (c.topic != topic) throw Error(ErrorCode::InvalidArgument, "community of another topic");
    Pin p = pin_for(c);
    // best-overlapping unclaimed old pin, first one on ties
    const std::string* best = nullptr;
    double best_overlap = 0.5;
    for (const auto& id : old_ids) {
      if (claimed.count(id)) continue;
      const double o = overlap(pins_.at(id).member_ids, p.member_ids);
      if (o >= best_overlap && (!best || o > best_overlap)) {
        best = &id;
        best_overlap = o;
      }
    }
    if (best) {
      claimed.insert(*best);
      p.pin_id = *best;
    } else {
      p.pin_id = std::to_string(topic) + ":" + p.area_id;
    }
    // distinct new communities cannot share member sets, but guard anyway
    if (next.count(p.pin_id)) continue;
    auto old = pins_.find(p.pin_id);
    if (old == pins_.end() || !(old->second == p)) events.push_back({PinEvent::Type::Upsert, p, true});
    next.emplace(p.pin_id, std::move(p));
  }
  for (const auto& id : old_ids) {
    if (next.count(id)) continue;
    events.push_back({PinEvent::Type::Removed, pins_.at(id), true});
    pins_.erase(id);
  }
  for (auto& [id, p] : next) pins_[id] = std::move(p);
  return events;
}

std::vector<PinEvent> PinBoard::expire(Timestamp now, Millis retention) {
  std::lock_guard lock(mu_);
  std::vector<PinEvent> out;
  for (auto it = pins_.begin(); it != pins_.end();) {
    if (now - it->second.last_updated > retention) {
      out.push_back({PinEvent::Type::Removed, it->second, true});
      it = pins_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

std::vector<PinEvent> PinBoard::drop_topics_from(std::size_t k) {
  std::lock_guard lock(mu_);
  std::vector<PinEvent> out;
  for (auto it = pins_.begin(); it != pins_.end();) {
    if (it->second.topic >= k) {
      out.push_back({PinEvent::Type::Removed, it->second, true});
      it = pins_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

std::vector<Pin> PinBoard::pins() const {
  std::lock_guard lock(mu_);
  std::vector<Pin> out;
  for (const auto& [_, p] : pins_) out.push_back(p);
  return out;
}

std::optional<Pin> PinBoard::find(const std::string& pin_id) const {
  std::lock_guard lock(mu_);
  auto it = pins_.find(pin_id);
  if (it == pins_.end()) return std::nullopt;
  return it->second;
}

std::size_t PinBoard::size() const {
  std::lock_guard lock(mu_);
  return pins_.size();
}

bool Mailbox::push(PinEvent e) {
  std::lock_guard lock(mu_);
  if (closed_) return false;
  if (queue_.size() >= capacity_) {
    overflowed_ = closed_ = true;
    queue_.clear();
    cv_.notify_all();
    return false;
  }
  queue_.push_back(std::move(e));
  cv_.notify_one();
  return true;
}

std::optional<PinEvent> Mailbox::pop(Millis wait) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, wait, [&] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) return std::nullopt;
  auto e = std::move(queue_.front());
  queue_.pop_front();
  return e;
}

void Mailbox::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

bool Mailbox::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

bool Mailbox::overflowed() const {
  std::lock_guard lock(mu_);
  return overflowed_;
}

std::size_t Mailbox::pending() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

SubscriptionHub::SubscriptionHub(std::size_t topic_count, std::size_t queue_capacity, bool gray)
    : k_(topic_count), capacity_(queue_capacity), gray_(gray) {
  if (queue_capacity == 0) throw Error(ErrorCode::InvalidArgument, "subscriber queue must hold something");
}

std::optional<PinEvent> SubscriptionHub::route(User& u, const PinEvent& e) const {
  const auto& id = e.pin.pin_id;
  const bool seen = u.visible.count(id) > 0;
  const bool subscribed = u.sub.topics.count(e.pin.topic) > 0;
  if (e.type == PinEvent::Type::Removed) {
    if (!seen) return std::nullopt;
    u.visible.erase(id);
    return PinEvent{PinEvent::Type::Removed, e.pin, subscribed};
  }
  const bool inside = !u.sub.bbox || u.sub.bbox->contains(e.pin.centroid);
  if (inside && (subscribed || gray_)) {
    u.visible[id] = e.pin;
    return PinEvent{PinEvent::Type::Upsert, e.pin, subscribed};
  }
  // moved out of view or no longer wanted
  if (seen) {
    u.visible.erase(id);
    return PinEvent{PinEvent::Type::Removed, e.pin, subscribed};
  }
  return std::nullopt;
}

void SubscriptionHub::deliver(User& u, PinEvent e) {
  if (!u.mailbox->push(std::move(e))) u.visible.clear();  // dropped; reconnect resyncs
}

Subscription SubscriptionHub::subscribe(const std::string& user_id, const std::set<std::size_t>& topics,
                                        const std::optional<BBox>& bbox, Timestamp now,
                                        const std::vector<Pin>& live) {
  if (user_id.empty()) throw Error(ErrorCode::InvalidArgument, "empty user id");
  if (topics.empty()) throw Error(ErrorCode::InvalidArgument, "subscription needs at least one topic");
  if (bbox) bbox->validate();
  std::lock_guard lock(mu_);
  for (auto t : topics)
    if (t >= k_) throw Error(ErrorCode::UnknownTopic, "topic " + std::to_string(t) + " (model has " + std::to_string(k_) + ")");
  auto [it, fresh] = users_.try_emplace(user_id);
  auto& u = it->second;
  if (fresh) {
    u.sub.user_id = user_id;
    u.sub.created_at = now;
    u.mailbox = std::make_shared<Mailbox>(capacity_);
  }
  u.sub.topics.insert(topics.begin(), topics.end());
  if (bbox) u.sub.bbox = bbox;
  // Bring the user's view up to date with the widened subscription.
  for (const auto& p : live)
    if (auto e = route(u, {PinEvent::Type::Upsert, p, true})) deliver(u, std::move(*e));
  return u.sub;
}

void SubscriptionHub::unsubscribe(const std::string& user_id, const std::set<std::size_t>& topics) {
  std::lock_guard lock(mu_);
  auto it = users_.find(user_id);
  if (it == users_.end()) throw Error(ErrorCode::UnknownUser, user_id);
  for (auto t : topics)
    if (t >= k_) throw Error(ErrorCode::UnknownTopic, "topic " + std::to_string(t));
  auto& u = it->second;
  for (auto t : topics) u.sub.topics.erase(t);
  for (auto v = u.visible.begin(); v != u.visible.end();) {
    if (topics.count(v->second.topic)) {
      u.mailbox->push({PinEvent::Type::Removed, v->second, false});
      v = u.visible.erase(v);
    } else {
      ++v;
    }
  }
  if (u.sub.topics.empty()) {
    u.mailbox->close();
    users_.erase(it);
  }
}

std::shared_ptr<Mailbox> SubscriptionHub::connect(const std::string& user_id, const std::vector<Pin>& live) {
  std::lock_guard lock(mu_);
  auto it = users_.find(user_id);
  if (it == users_.end()) throw Error(ErrorCode::UnknownUser, user_id);
  auto& u = it->second;
  if (!u.mailbox->closed() && !u.attached) {
    u.attached = true;
    return u.mailbox;
  }
  u.mailbox->close();
  u.mailbox = std::make_shared<Mailbox>(capacity_);
  u.attached = true;
  u.visible.clear();
  for (const auto& p : live)
    if (auto e = route(u, {PinEvent::Type::Upsert, p, true})) deliver(u, std::move(*e));
  return u.mailbox;
}

void SubscriptionHub::publish(const std::vector<PinEvent>& events) {
  std::lock_guard lock(mu_);
  for (auto& [_, u] : users_)
    for (const auto& e : events)
      if (auto out = route(u, e)) deliver(u, std::move(*out));
}

std::optional<Subscription> SubscriptionHub::subscription(const std::string& user_id) const {
  std::lock_guard lock(mu_);
  auto it = users_.find(user_id);
  if (it == users_.end()) return std::nullopt;
  return it->second.sub;
}

std::vector<Subscription> SubscriptionHub::subscriptions() const {
  std::lock_guard lock(mu_);
  std::vector<Subscription> out;
  for (const auto& [_, u] : users_) out.push_back(u.sub);
  return out;
}

void SubscriptionHub::set_topic_count(std::size_t k) {
  std::lock_guard lock(mu_);
  k_ = k;
  for (auto it = users_.begin(); it != users_.end();) {
    auto& topics = it->second.sub.topics;
    topics.erase(topics.lower_bound(k), topics.end());
    if (topics.empty()) {
      it->second.mailbox->close();
      it = users_.erase(it);
    } else {
      ++it;
    }
  }
}

std::size_t SubscriptionHub::topic_count() const {
  std::lock_guard lock(mu_);
  return k_;
}

void SubscriptionHub::close_all() {
  std::lock_guard lock(mu_);
  for (auto& [_, u] : users_) u.mailbox->close();
}

}  // namespace contcomm::gateway
