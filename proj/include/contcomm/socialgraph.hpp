#pragma once

#include <map>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "contcomm/corpus.hpp"
#include "contcomm/geo.hpp"
#include "contcomm/textprep.hpp"

namespace contcomm::socialgraph {

using NodeId = std::string;

struct Node {
  std::vector<std::string> content;  // preprocessed tokens
  std::string text;                  // raw text, kept for external classifiers
  GeoPoint location;
  Timestamp created_at{};

  friend bool operator==(const Node&, const Node&) = default;
};

/// Undirected edge stored with `first < second`.
using Edge = std::pair<NodeId, NodeId>;

inline Edge make_edge(NodeId a, NodeId b) {
  if (b < a) std::swap(a, b);
  return {std::move(a), std::move(b)};
}

using Components = std::vector<std::vector<NodeId>>;

/// Immutable undirected graph with per-node content and location. The
/// component partition is computed on construction.
class SocialGraph {
 public:
  SocialGraph() = default;
  /// Throws InvalidArgument on self-loops or edges to missing nodes.
  SocialGraph(std::map<NodeId, Node> nodes, std::set<Edge> edges);

  const std::map<NodeId, Node>& nodes() const { return nodes_; }
  const std::set<Edge>& edges() const { return edges_; }
  /// Parts sorted internally and ordered by smallest member id.
  const Components& components() const { return components_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool contains(const NodeId& id) const { return nodes_.count(id) > 0; }
  const Node& node(const NodeId& id) const;
  bool empty() const { return nodes_.empty(); }

  friend bool operator==(const SocialGraph& a, const SocialGraph& b) {
    return a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  std::map<NodeId, Node> nodes_;
  std::set<Edge> edges_;
  Components components_;
};

/// Union-find over the node set.
Components connected_components(const std::map<NodeId, Node>& nodes, const std::set<Edge>& edges);
inline const Components& connected_components(const SocialGraph& g) { return g.components(); }

/// New graph without `doomed` and their incident edges. Throws UnknownNode.
SocialGraph remove_nodes(const SocialGraph& g, const std::set<NodeId>& doomed);

/// Subgraph induced by `keep` (edges need both endpoints kept). Ids absent
/// from `g` are ignored.
SocialGraph induced_subgraph(const SocialGraph& g, const std::set<NodeId>& keep);

/// One graph per connected component, in component order.
std::vector<SocialGraph> split_components(const SocialGraph& g);
/// Disjoint union; throws InvalidArgument on overlapping node ids.
SocialGraph merge(const std::vector<SocialGraph>& parts);

struct BuildReport {
  std::size_t dangling = 0;   // references pointing outside the batch
  std::size_t duplicates = 0; // repeated record ids (first kept)
};

/// Incremental construction with late-arrival relinking: a retweet/reply
/// whose parent has not been seen yet is remembered and linked when the
/// parent arrives, provided the gap is within `relink_window`.
class GraphBuilder {
 public:
  explicit GraphBuilder(Millis relink_window = std::chrono::hours(24)) : window_(relink_window) {}

  /// Returns false when the id was already present.
  bool add(const corpus::TweetRecord& rec, std::vector<std::string> content, GeoPoint location);

  /// Drops nodes created before `cutoff` together with their edges and
  /// pending references.
  void evict_before(Timestamp cutoff);

  SocialGraph build() const;
  std::size_t pending_references() const;
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Pending {
    NodeId source;
    Timestamp at;
  };
  Millis window_;
  std::map<NodeId, Node> nodes_;
  std::set<Edge> edges_;
  std::unordered_map<NodeId, std::vector<Pending>> pending_;  // missing parent -> children
};

/// One node per record; edges from retweet_of / reply_to. `contents` and
/// `locations` must cover every record id (InvalidArgument otherwise).
SocialGraph build_graph(const std::vector<corpus::TweetRecord>& records,
                        const std::unordered_map<NodeId, std::vector<std::string>>& contents,
                        const std::unordered_map<NodeId, GeoPoint>& locations, BuildReport* report = nullptr);

void dump_edges(std::ostream& out, const SocialGraph& g);
void dump_nodes(std::ostream& out, const SocialGraph& g);

}  // namespace contcomm::socialgraph
