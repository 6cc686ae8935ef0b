#include "contcomm/socialgraph.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

namespace contcomm::socialgraph {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
};

}  // namespace

Components connected_components(const std::map<NodeId, Node>& nodes, const std::set<Edge>& edges) {
  std::vector<const NodeId*> ids;
  ids.reserve(nodes.size());
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(nodes.size());
  for (const auto& [id, _] : nodes) {
    index.emplace(id, ids.size());
    ids.push_back(&id);
  }
  DisjointSets sets(ids.size());
  for (const auto& [a, b] : edges) sets.unite(index.at(a), index.at(b));

  // ids are sorted (std::map), so the first time a root is seen marks the
  // component's smallest member; appending keeps each part sorted.
  Components parts;
  std::unordered_map<std::size_t, std::size_t> part_of_root;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto root = sets.find(i);
    auto [it, inserted] = part_of_root.emplace(root, parts.size());
    if (inserted) parts.emplace_back();
    parts[it->second].push_back(*ids[i]);
  }
  return parts;
}

SocialGraph::SocialGraph(std::map<NodeId, Node> nodes, std::set<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  for (const auto& [a, b] : edges_) {
    if (a == b) throw Error(ErrorCode::InvalidArgument, "self-loop on " + a);
    if (!(a < b)) throw Error(ErrorCode::InvalidArgument, "edge not normalised: " + a + "-" + b);
    if (!nodes_.count(a) || !nodes_.count(b))
      throw Error(ErrorCode::InvalidArgument, "edge " + a + "-" + b + " references a missing node");
  }
  components_ = connected_components(nodes_, edges_);
}

const Node& SocialGraph::node(const NodeId& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::UnknownNode, id);
  return it->second;
}

SocialGraph remove_nodes(const SocialGraph& g, const std::set<NodeId>& doomed) {
  for (const auto& id : doomed)
    if (!g.contains(id)) throw Error(ErrorCode::UnknownNode, id);
  if (doomed.empty()) return g;
  std::map<NodeId, Node> nodes;
  for (const auto& [id, n] : g.nodes())
    if (!doomed.count(id)) nodes.emplace(id, n);
  std::set<Edge> edges;
  for (const auto& e : g.edges())
    if (!doomed.count(e.first) && !doomed.count(e.second)) edges.insert(e);
  return SocialGraph(std::move(nodes), std::move(edges));
}

SocialGraph induced_subgraph(const SocialGraph& g, const std::set<NodeId>& keep) {
  std::map<NodeId, Node> nodes;
  for (const auto& id : keep)
    if (auto it = g.nodes().find(id); it != g.nodes().end()) nodes.emplace(id, it->second);
  std::set<Edge> edges;
  for (const auto& e : g.edges())
    if (nodes.count(e.first) && nodes.count(e.second)) edges.insert(e);
  return SocialGraph(std::move(nodes), std::move(edges));
}

std::vector<SocialGraph> split_components(const SocialGraph& g) {
  std::vector<SocialGraph> out;
  out.reserve(g.components().size());
  for (const auto& part : g.components()) out.push_back(induced_subgraph(g, {part.begin(), part.end()}));
  return out;
}

SocialGraph merge(const std::vector<SocialGraph>& parts) {
  std::map<NodeId, Node> nodes;
  std::set<Edge> edges;
  for (const auto& p : parts) {
    for (const auto& [id, n] : p.nodes())
      if (!nodes.emplace(id, n).second) throw Error(ErrorCode::InvalidArgument, "node " + id + " in two graphs");
    edges.insert(p.edges().begin(), p.edges().end());
  }
  return SocialGraph(std::move(nodes), std::move(edges));
}

bool GraphBuilder::add(const corpus::TweetRecord& rec, std::vector<std::string> content, GeoPoint location) {
  if (nodes_.count(rec.id)) return false;
  nodes_.emplace(rec.id, Node{std::move(content), rec.text, location, rec.created_at});

  for (const auto* parent : {&rec.retweet_of, &rec.reply_to}) {
    if (!*parent || **parent == rec.id) continue;
    if (nodes_.count(**parent))
      edges_.insert(make_edge(rec.id, **parent));
    else
      pending_[**parent].push_back({rec.id, rec.created_at});
  }

  if (auto it = pending_.find(rec.id); it != pending_.end()) {
    for (const auto& p : it->second) {
      auto gap = p.at - rec.created_at;
      if (gap < Millis::zero()) gap = -gap;
      if (gap <= window_ && nodes_.count(p.source)) edges_.insert(make_edge(rec.id, p.source));
    }
    pending_.erase(it);
  }
  return true;
}

void GraphBuilder::evict_before(Timestamp cutoff) {
  std::set<NodeId> gone;
  for (auto it = nodes_.begin(); it != nodes_.end();) {
    if (it->second.created_at < cutoff) {
      gone.insert(it->first);
      it = nodes_.erase(it);
    } else {
      ++it;
    }
  }
  if (gone.empty()) return;
  for (auto it = edges_.begin(); it != edges_.end();) {
    if (gone.count(it->first) || gone.count(it->second))
      it = edges_.erase(it);
    else
      ++it;
  }
  for (auto it = pending_.begin(); it != pending_.end();) {
    auto& v = it->second;
    v.erase(std::remove_if(v.begin(), v.end(), [&](const Pending& p) { return p.at < cutoff || gone.count(p.source); }),
            v.end());
    it = v.empty() ? pending_.erase(it) : std::next(it);
  }
}

SocialGraph GraphBuilder::build() const { return SocialGraph(nodes_, edges_); }

std::size_t GraphBuilder::pending_references() const {
  std::size_t n = 0;
  for (const auto& [_, v] : pending_) n += v.size();
  return n;
}

SocialGraph build_graph(const std::vector<corpus::TweetRecord>& records,
                        const std::unordered_map<NodeId, std::vector<std::string>>& contents,
                        const std::unordered_map<NodeId, GeoPoint>& locations, BuildReport* report) {
  GraphBuilder builder(Millis::max());
  std::size_t duplicates = 0;
  for (const auto& r : records) {
    auto c = contents.find(r.id);
    auto l = locations.find(r.id);
    if (c == contents.end() || l == locations.end())
      throw Error(ErrorCode::InvalidArgument, "missing content or location for " + r.id);
    if (!builder.add(r, c->second, l->second)) ++duplicates;
  }
  if (report) {
    report->dangling = builder.pending_references();
    report->duplicates = duplicates;
  }
  return builder.build();
}

void dump_edges(std::ostream& out, const SocialGraph& g) {
  for (const auto& [a, b] : g.edges()) out << a << '\t' << b << '\n';
}

void dump_nodes(std::ostream& out, const SocialGraph& g) {
  for (const auto& [id, n] : g.nodes()) {
    nlohmann::json j{{"id", id},
                     {"tokens", n.content},
                     {"source", std::string(to_string(n.location.source))},
                     {"created_at", format_iso8601(n.created_at)}};
    if (n.location.resolved()) {
      j["lat"] = n.location.lat;
      j["lon"] = n.location.lon;
    }
    out << j.dump() << '\n';
  }
}

}  // namespace contcomm::socialgraph
