#include "contcomm/communities.hpp"

namespace contcomm::communities {

std::vector<std::vector<std::size_t>> DbscanResult::clusters() const {
  std::vector<std::vector<std::size_t>> out(cluster_count);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) out[static_cast<std::size_t>(labels[i])].push_back(i);
  return out;
}

LatLonMatrix to_matrix(const std::vector<GeoPoint>& points) {
  LatLonMatrix m(static_cast<Eigen::Index>(points.size()), 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].resolved()) throw Error(ErrorCode::UnresolvedInput, "point " + std::to_string(i));
    m(static_cast<Eigen::Index>(i), 0) = points[i].lat;
    m(static_cast<Eigen::Index>(i), 1) = points[i].lon;
  }
  return m;
}

DbscanResult dbscan(const std::vector<GeoPoint>& points, double eps_km, std::size_t min_pts) {
  return dbscan(to_matrix(points), eps_km, min_pts);
}

std::string area_id(const std::vector<socialgraph::NodeId>& sorted_ids) {
  std::uint64_t h = fnv1a64("");
  for (const auto& id : sorted_ids) {
    h = fnv1a64(id, h);
    h = fnv1a64("\n", h);
  }
  return hex64(h);
}

std::vector<CommunityGraph> community_graphs(const topics::TopicGraph& tg, double eps_km, std::size_t min_pts) {
  std::vector<socialgraph::NodeId> ids;
  std::vector<GeoPoint> pts;
  for (const auto& [id, node] : tg.graph.nodes()) {
    if (!node.location.resolved()) continue;
    ids.push_back(id);
    pts.push_back(node.location);
  }
  std::vector<CommunityGraph> out;
  if (ids.empty()) return out;
  const auto m = to_matrix(pts);
  const auto result = dbscan(m, eps_km, min_pts);
  const auto clusters = result.clusters();
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    CommunityGraph cg;
    cg.topic = tg.topic;
    cg.cluster.cluster_id = c;
    cg.cluster.topic = tg.topic;
    std::set<socialgraph::NodeId> keep;
    for (auto i : clusters[c]) {
      // ids come from a std::map, so members stay sorted
      cg.cluster.member_ids.push_back(ids[i]);
      cg.cluster.member_points.push_back(pts[i].latlon());
      if (result.core[i]) cg.cluster.core_points.push_back(pts[i].latlon());
      keep.insert(ids[i]);
    }
    cg.area_id = area_id(cg.cluster.member_ids);
    cg.graph = socialgraph::induced_subgraph(tg.graph, keep);
    LatLonMatrix members(static_cast<Eigen::Index>(clusters[c].size()), 2);
    for (std::size_t i = 0; i < clusters[c].size(); ++i) members.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(clusters[c][i]));
    const auto centroid = spherical_centroid(members);
    cg.centroid = {centroid(0), centroid(1)};
    for (Eigen::Index i = 0; i < members.rows(); ++i)
      cg.radius_km = std::max(cg.radius_km, haversine_km(members.row(i), centroid));
    out.push_back(std::move(cg));
  }
  return out;
}

std::pair<LatLonMatrix, std::vector<int>> flatten(const std::vector<GeoCluster>& clusters) {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.member_points.size();
  LatLonMatrix m(static_cast<Eigen::Index>(n), 2);
  std::vector<int> labels;
  labels.reserve(n);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (clusters[c].member_points.empty()) throw Error(ErrorCode::InvalidArgument, "empty cluster");
    for (const auto& p : clusters[c].member_points) {
      m(row, 0) = p.lat;
      m(row, 1) = p.lon;
      ++row;
      labels.push_back(static_cast<int>(c));
    }
  }
  return {std::move(m), std::move(labels)};
}

double davies_bouldin(const std::vector<GeoCluster>& clusters) {
  auto [m, l] = flatten(clusters);
  return davies_bouldin(m, l);
}

double calinski_harabasz(const std::vector<GeoCluster>& clusters) {
  auto [m, l] = flatten(clusters);
  return calinski_harabasz(m, l);
}

double silhouette(const std::vector<GeoCluster>& clusters) {
  auto [m, l] = flatten(clusters);
  return silhouette(m, l);
}

nlohmann::json community_report(const std::vector<CommunityGraph>& communities) {
  auto pairs = [](const std::vector<LatLon>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& p : v) a.push_back({p.lat, p.lon});
    return a;
  };
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : communities) {
    out.push_back({{"topic", c.topic},
                   {"area_id", c.area_id},
                   {"core_points", pairs(c.cluster.core_points)},
                   {"member_ids", c.cluster.member_ids},
                   {"centroid", {c.centroid.lat, c.centroid.lon}},
                   {"radius_km", c.radius_km}});
  }
  return out;
}

}  // namespace contcomm::communities
