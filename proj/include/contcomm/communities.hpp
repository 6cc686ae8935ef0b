#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "contcomm/geo.hpp"
#include "contcomm/socialgraph.hpp"
#include "contcomm/topics.hpp"

namespace contcomm::communities {

inline constexpr double kDefaultRadiusKm = 50.0;
inline constexpr std::size_t kDefaultMinPts = 3;
inline constexpr int kNoise = -1;

/// n x 2 matrix of (lat, lon) rows in degrees.
using LatLonMatrix = Eigen::Matrix<double, Eigen::Dynamic, 2>;

struct DbscanResult {
  std::vector<int> labels;  // cluster index or kNoise, per input row
  std::vector<bool> core;
  std::size_t cluster_count = 0;

  /// Row indices per cluster, ascending.
  std::vector<std::vector<std::size_t>> clusters() const;
};

namespace detail {

// Neighbourhood queries over a latitude-sorted index: a great-circle
// distance of eps km bounds the latitude difference by eps / R radians.
template <typename Derived>
class RegionIndex {
 public:
  RegionIndex(const Eigen::MatrixBase<Derived>& pts, double eps_km) : pts_(pts), eps_(eps_km) {
    order_.resize(static_cast<std::size_t>(pts.rows()));
    std::iota(order_.begin(), order_.end(), Eigen::Index{0});
    std::stable_sort(order_.begin(), order_.end(), [&](Eigen::Index a, Eigen::Index b) { return pts(a, 0) < pts(b, 0); });
    lats_.reserve(order_.size());
    for (auto i : order_) lats_.push_back(pts(i, 0));
    dlat_ = rad2deg(eps_km / kEarthRadiusKm) * (1.0 + 1e-12) + 1e-12;
  }

  /// Rows within eps of row i (inclusive, i itself included), ascending.
  std::vector<Eigen::Index> region(Eigen::Index i) const {
    const double lat = pts_(i, 0);
    auto lo = std::lower_bound(lats_.begin(), lats_.end(), lat - dlat_);
    auto hi = std::upper_bound(lats_.begin(), lats_.end(), lat + dlat_);
    std::vector<Eigen::Index> out;
    for (auto it = lo; it != hi; ++it) {
      auto j = order_[static_cast<std::size_t>(it - lats_.begin())];
      if (haversine_km(pts_(i, 0), pts_(i, 1), pts_(j, 0), pts_(j, 1)) <= eps_) out.push_back(j);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  const Eigen::MatrixBase<Derived>& pts_;
  double eps_;
  double dlat_ = 0.0;
  std::vector<Eigen::Index> order_;
  std::vector<double> lats_;
};

}  // namespace detail

/// DBSCAN with the haversine metric. A point is core when at least min_pts
/// points (itself included) lie within eps_km. Rows are scanned in order and
/// a border point joins the first cluster that reaches it.
template <typename Derived>
DbscanResult dbscan(const Eigen::MatrixBase<Derived>& pts, double eps_km, std::size_t min_pts) {
  if (!(eps_km > 0)) throw Error(ErrorCode::InvalidArgument, "eps must be positive");
  if (min_pts < 1) throw Error(ErrorCode::InvalidArgument, "min_pts must be at least 1");
  constexpr int kUnvisited = -2;
  const auto n = static_cast<std::size_t>(pts.rows());
  DbscanResult r;
  r.labels.assign(n, kUnvisited);
  r.core.assign(n, false);
  detail::RegionIndex<Derived> index(pts, eps_km);

  int cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (r.labels[i] != kUnvisited) continue;
    auto seeds = index.region(static_cast<Eigen::Index>(i));
    if (seeds.size() < min_pts) {
      r.labels[i] = kNoise;
      continue;
    }
    r.core[i] = true;
    r.labels[i] = cluster;
    std::deque<Eigen::Index> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const auto q = static_cast<std::size_t>(queue.front());
      queue.pop_front();
      if (r.labels[q] == kNoise) r.labels[q] = cluster;
      if (r.labels[q] != kUnvisited) continue;
      r.labels[q] = cluster;
      auto more = index.region(static_cast<Eigen::Index>(q));
      if (more.size() >= min_pts) {
        r.core[q] = true;
        queue.insert(queue.end(), more.begin(), more.end());
      }
    }
    ++cluster;
  }
  r.cluster_count = static_cast<std::size_t>(cluster);
  return r;
}

/// Throws UnresolvedInput when a point has no location.
DbscanResult dbscan(const std::vector<GeoPoint>& points, double eps_km, std::size_t min_pts);

LatLonMatrix to_matrix(const std::vector<GeoPoint>& points);

struct GeoCluster {
  std::size_t cluster_id = 0;
  std::size_t topic = 0;
  std::vector<LatLon> core_points;
  std::vector<socialgraph::NodeId> member_ids;  // sorted
  std::vector<LatLon> member_points;            // aligned with member_ids
};

struct CommunityGraph {
  std::size_t topic = 0;
  std::string area_id;  // stable hash of the sorted member ids
  GeoCluster cluster;
  socialgraph::SocialGraph graph;
  LatLon centroid;
  double radius_km = 0.0;  // farthest member from the centroid
};

/// Stable hex id over sorted member ids.
std::string area_id(const std::vector<socialgraph::NodeId>& sorted_ids);

/// DBSCAN over the resolved nodes of one topic graph (node id order); one
/// community per cluster with the edges among its members. Unresolved nodes
/// and noise produce nothing.
std::vector<CommunityGraph> community_graphs(const topics::TopicGraph& tg, double eps_km = kDefaultRadiusKm,
                                             std::size_t min_pts = kDefaultMinPts);

// Cluster validity indices. Points are (lat, lon) rows, labels are any
// non-negative cluster ids; distances are great-circle and centroids are
// spherical means.

namespace detail {

struct Grouping {
  std::vector<std::vector<Eigen::Index>> rows;  // per dense cluster
};

inline Grouping group(const std::vector<int>& labels, Eigen::Index n) {
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw Error(ErrorCode::InvalidArgument, "labels and points differ in length");
  std::map<int, std::size_t> dense;
  for (int l : labels) {
    if (l < 0) throw Error(ErrorCode::InvalidArgument, "noise label in cluster metric input");
    dense.emplace(l, 0);
  }
  std::size_t next = 0;
  for (auto& [_, d] : dense) d = next++;
  Grouping g;
  g.rows.resize(dense.size());
  for (Eigen::Index i = 0; i < n; ++i) g.rows[dense[labels[static_cast<std::size_t>(i)]]].push_back(i);
  if (g.rows.size() < 2) throw Error(ErrorCode::TooFewClusters, "need at least two clusters");
  return g;
}

template <typename Derived>
LatLonMatrix gather(const Eigen::MatrixBase<Derived>& pts, const std::vector<Eigen::Index>& rows) {
  LatLonMatrix out(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts.row(rows[i]);
  return out;
}

}  // namespace detail

template <typename Derived>
double davies_bouldin(const Eigen::MatrixBase<Derived>& pts, const std::vector<int>& labels) {
  const auto g = detail::group(labels, pts.rows());
  const std::size_t k = g.rows.size();
  LatLonMatrix centroids(static_cast<Eigen::Index>(k), 2);
  Eigen::VectorXd scatter(static_cast<Eigen::Index>(k));
  for (std::size_t c = 0; c < k; ++c) {
    const auto members = detail::gather(pts, g.rows[c]);
    const auto ci = static_cast<Eigen::Index>(c);
    centroids.row(ci) = spherical_centroid(members);
    double s = 0.0;
    for (Eigen::Index i = 0; i < members.rows(); ++i) s += haversine_km(members.row(i), centroids.row(ci));
    scatter[ci] = s / static_cast<double>(members.rows());
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(k); ++i) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(k); ++j) {
      if (i == j) continue;
      const double d = haversine_km(centroids.row(i), centroids.row(j));
      // Coincident centroids contribute nothing, as in common practice.
      const double ratio = d > 0 ? (scatter[i] + scatter[j]) / d : 0.0;
      worst = std::max(worst, ratio);
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

/// Zero within-cluster dispersion gives +inf (or 0 when the between-cluster
/// dispersion is also zero).
template <typename Derived>
double calinski_harabasz(const Eigen::MatrixBase<Derived>& pts, const std::vector<int>& labels) {
  const auto g = detail::group(labels, pts.rows());
  const auto k = static_cast<double>(g.rows.size());
  const auto n = static_cast<double>(pts.rows());
  const auto overall = spherical_centroid(pts);
  double between = 0.0, within = 0.0;
  for (const auto& rows : g.rows) {
    const auto members = detail::gather(pts, rows);
    const auto c = spherical_centroid(members);
    const double d = haversine_km(c, overall);
    between += static_cast<double>(rows.size()) * d * d;
    for (Eigen::Index i = 0; i < members.rows(); ++i) {
      const double e = haversine_km(members.row(i), c);
      within += e * e;
    }
  }
  if (within == 0.0) return between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return (between / (k - 1.0)) / (within / (n - k));
}

/// Mean per-point silhouette; a point alone in its cluster scores 0.
template <typename Derived>
double silhouette(const Eigen::MatrixBase<Derived>& pts, const std::vector<int>& labels) {
  const auto g = detail::group(labels, pts.rows());
  const auto n = pts.rows();
  std::vector<std::size_t> of(static_cast<std::size_t>(n));
  for (std::size_t c = 0; c < g.rows.size(); ++c)
    for (auto i : g.rows[c]) of[static_cast<std::size_t>(i)] = c;
  double total = 0.0;
  std::vector<double> sums(g.rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t own = of[static_cast<std::size_t>(i)];
    if (g.rows[own].size() == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) sums[of[static_cast<std::size_t>(j)]] += haversine_km(pts.row(i), pts.row(j));
    const double a = sums[own] / static_cast<double>(g.rows[own].size() - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < g.rows.size(); ++c)
      if (c != own) b = std::min(b, sums[c] / static_cast<double>(g.rows[c].size()));
    const double m = std::max(a, b);
    if (m > 0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

/// Flattens clusters into (points, labels) for the indices above.
std::pair<LatLonMatrix, std::vector<int>> flatten(const std::vector<GeoCluster>& clusters);

double davies_bouldin(const std::vector<GeoCluster>& clusters);
double calinski_harabasz(const std::vector<GeoCluster>& clusters);
double silhouette(const std::vector<GeoCluster>& clusters);

/// JSON array of {topic, area_id, core_points, member_ids, centroid, radius_km}.
nlohmann::json community_report(const std::vector<CommunityGraph>& communities);

}  // namespace contcomm::communities
