#pragma once

// Brute-force reference implementations shared by the module tests and the
// acceptance run. Deliberately naive; none of this reuses library code paths
// beyond the public types.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <queue>
#include <random>
#include <set>

#include "contcomm/communities.hpp"
#include "contcomm/corpus.hpp"
#include "contcomm/socialgraph.hpp"
#include "contcomm/topics.hpp"
#include "contcomm/veracity.hpp"

namespace oracle {

using namespace contcomm;
using communities::DbscanResult;
using communities::kNoise;
using communities::LatLonMatrix;
using socialgraph::Components;
using socialgraph::make_edge;
using socialgraph::Edge;
using socialgraph::Node;
using socialgraph::NodeId;
using textprep::CleanDoc;

// --- graphs

// Brute-force BFS oracle over adjacency lists, parts sorted and ordered by
// smallest member.
inline Components bfs_components(const std::map<NodeId, Node>& nodes, const std::set<Edge>& edges) {
  std::map<NodeId, std::vector<NodeId>> adj;
  for (const auto& [id, _] : nodes) adj[id];
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::set<NodeId> seen;
  Components out;
  for (const auto& [start, _] : adj) {
    if (seen.count(start)) continue;
    std::vector<NodeId> part;
    std::queue<NodeId> q;
    q.push(start);
    seen.insert(start);
    while (!q.empty()) {
      auto u = q.front();
      q.pop();
      part.push_back(u);
      for (const auto& v : adj[u])
        if (seen.insert(v).second) q.push(v);
    }
    std::sort(part.begin(), part.end());
    out.push_back(part);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

struct RandomGraph {
  std::map<NodeId, Node> nodes;
  std::set<Edge> edges;
};

inline RandomGraph random_graph(std::mt19937_64& rng, std::size_t max_nodes) {
  RandomGraph g;
  const std::size_t n = rng() % (max_nodes + 1);
  std::vector<NodeId> ids;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("n" + std::to_string(rng() % 100000));
    g.nodes[ids.back()] = Node{{"w" + std::to_string(i % 7)}, "t", GeoPoint{0, 0, GeoSource::Device}, {}};
  }
  const std::set<NodeId> unique(ids.begin(), ids.end());
  ids.assign(unique.begin(), unique.end());
  if (ids.size() < 2) return g;
  const std::size_t m = rng() % (ids.size() + ids.size() / 2 + 1);
  for (std::size_t e = 0; e < m; ++e) {
    auto a = ids[rng() % ids.size()], b = ids[rng() % ids.size()];
    if (a != b) g.edges.insert(make_edge(a, b));
  }
  return g;
}

// The graph rebuilt from scratch without `doomed` and its edges.
inline socialgraph::SocialGraph rebuild_without(const std::map<NodeId, Node>& nodes, const std::set<Edge>& edges,
                                                const std::set<NodeId>& doomed) {
  std::map<NodeId, Node> keep_nodes;
  for (const auto& [id, n] : nodes)
    if (!doomed.count(id)) keep_nodes[id] = n;
  std::set<Edge> keep_edges;
  for (const auto& e : edges)
    if (!doomed.count(e.first) && !doomed.count(e.second)) keep_edges.insert(e);
  return {keep_nodes, keep_edges};
}

// --- geography

constexpr double kR = 6371.0088;

// Independent great-circle distance via the chord between unit vectors.
inline double chord_km(double lat1, double lon1, double lat2, double lon2) {
  auto v = [](double la, double lo) {
    la *= std::numbers::pi / 180;
    lo *= std::numbers::pi / 180;
    return Eigen::Vector3d(std::cos(la) * std::cos(lo), std::cos(la) * std::sin(lo), std::sin(la));
  };
  const double c = (v(lat1, lon1) - v(lat2, lon2)).norm();
  return 2 * kR * std::asin(std::min(1.0, c / 2));
}

double dist(const LatLonMatrix& m, Eigen::Index i, Eigen::Index j) { return chord_km(m(i, 0), m(i, 1), m(j, 0), m(j, 1)); }

// Textbook O(n^2) DBSCAN over a precomputed neighbour table, scanning rows
// in order and claiming border points for the first cluster that reaches
// them.
inline DbscanResult naive_dbscan(const LatLonMatrix& m, double eps, std::size_t min_pts) {
  const auto n = static_cast<std::size_t>(m.rows());
  std::vector<std::vector<std::size_t>> nb(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (dist(m, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= eps) nb[i].push_back(j);
  DbscanResult r;
  r.labels.assign(n, -2);
  r.core.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) r.core[i] = nb[i].size() >= min_pts;
  int c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (r.labels[i] != -2) continue;
    if (!r.core[i]) {
      r.labels[i] = kNoise;
      continue;
    }
    std::vector<std::size_t> stack{i};
    r.labels[i] = c;
    while (!stack.empty()) {
      auto p = stack.back();
      stack.pop_back();
      for (auto q : nb[p]) {
        if (r.labels[q] == kNoise) r.labels[q] = c;
        if (r.labels[q] != -2) continue;
        r.labels[q] = c;
        if (r.core[q]) stack.push_back(q);
      }
    }
    ++c;
  }
  r.cluster_count = static_cast<std::size_t>(c);
  return r;
}

// Random geography: a few blobs with random spreads plus scattered points.
inline LatLonMatrix random_geography(std::mt19937_64& rng, std::size_t max_points) {
  const std::size_t n = 1 + rng() % max_points;
  std::uniform_real_distribution<double> lat(-60, 60), lon(-180, 180), unit(0, 1);
  std::vector<std::pair<double, double>> centers;
  for (std::size_t c = 0, nc = 1 + rng() % 6; c < nc; ++c) centers.emplace_back(lat(rng), lon(rng));
  LatLonMatrix m(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (unit(rng) < 0.15) {
      m(i, 0) = lat(rng);
      m(i, 1) = lon(rng);
      continue;
    }
    auto [cla, clo] = centers[rng() % centers.size()];
    const double spread = 0.05 + 1.5 * unit(rng);  // degrees
    std::normal_distribution<double> off(0, spread);
    m(i, 0) = std::clamp(cla + off(rng), -89.0, 89.0);
    m(i, 1) = std::remainder(clo + off(rng), 360.0);
  }
  return m;
}

// Same partition up to relabeling: labels correspond one-to-one, noise
// matches noise.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == kNoise) != (b[i] == kNoise)) return false;
    if (a[i] == kNoise) continue;
    if (ab.emplace(a[i], b[i]).first->second != b[i]) return false;
    if (ba.emplace(b[i], a[i]).first->second != a[i]) return false;
  }
  return true;
}

inline Eigen::RowVector3d unit_vec(double la, double lo) {
  la *= std::numbers::pi / 180;
  lo *= std::numbers::pi / 180;
  return {std::cos(la) * std::cos(lo), std::cos(la) * std::sin(lo), std::sin(la)};
}

// Centroid as the normalised mean of unit vectors, returned as a unit vector.
inline Eigen::RowVector3d centroid_vec(const LatLonMatrix& m, const std::vector<Eigen::Index>& idx) {
  Eigen::RowVector3d s = Eigen::RowVector3d::Zero();
  for (auto i : idx) s += unit_vec(m(i, 0), m(i, 1));
  return s.normalized();
}

inline double arc(const Eigen::RowVector3d& a, const Eigen::RowVector3d& b) {
  return 2 * kR * std::asin(std::min(1.0, (a - b).norm() / 2));
}

inline std::vector<std::vector<Eigen::Index>> groups_of(const std::vector<int>& labels) {
  std::map<int, std::vector<Eigen::Index>> g;
  for (std::size_t i = 0; i < labels.size(); ++i) g[labels[i]].push_back(static_cast<Eigen::Index>(i));
  std::vector<std::vector<Eigen::Index>> out;
  for (auto& [_, v] : g) out.push_back(v);
  return out;
}

inline double oracle_db(const LatLonMatrix& m, const std::vector<int>& labels) {
  auto g = groups_of(labels);
  std::vector<Eigen::RowVector3d> c;
  std::vector<double> s;
  for (auto& rows : g) {
    c.push_back(centroid_vec(m, rows));
    double t = 0;
    for (auto i : rows) t += arc(unit_vec(m(i, 0), m(i, 1)), c.back());
    s.push_back(t / static_cast<double>(rows.size()));
  }
  double total = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double worst = 0;
    for (std::size_t j = 0; j < g.size(); ++j)
      if (i != j) worst = std::max(worst, (s[i] + s[j]) / arc(c[i], c[j]));
    total += worst;
  }
  return total / static_cast<double>(g.size());
}

inline double oracle_ch(const LatLonMatrix& m, const std::vector<int>& labels) {
  auto g = groups_of(labels);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(m.rows()));
  std::iota(all.begin(), all.end(), 0);
  const auto overall = centroid_vec(m, all);
  double between = 0, within = 0;
  for (auto& rows : g) {
    auto c = centroid_vec(m, rows);
    between += static_cast<double>(rows.size()) * std::pow(arc(c, overall), 2);
    for (auto i : rows) within += std::pow(arc(unit_vec(m(i, 0), m(i, 1)), c), 2);
  }
  const double k = static_cast<double>(g.size()), n = static_cast<double>(m.rows());
  if (within == 0) return between == 0 ? 0.0 : std::numeric_limits<double>::infinity();  // k == n
  return (between / (k - 1)) / (within / (n - k));
}

inline double oracle_silhouette(const LatLonMatrix& m, const std::vector<int>& labels) {
  const auto n = m.rows();
  double total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::map<int, std::pair<double, int>> acc;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) {
        auto& [sum, cnt] = acc[labels[static_cast<std::size_t>(j)]];
        sum += dist(m, i, j);
        ++cnt;
      }
    const int own = labels[static_cast<std::size_t>(i)];
    if (!acc.count(own)) continue;  // singleton
    const double a = acc[own].first / acc[own].second;
    double b = 1e300;
    for (auto& [l, sc] : acc)
      if (l != own) b = std::min(b, sc.first / sc.second);
    if (std::max(a, b) > 0) total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

// --- topics

struct Planted {
  std::vector<std::string> vocab;
  Eigen::MatrixXd topic_word;  // k x V, rows sum to 1
  std::vector<CleanDoc> docs;
};

// Each topic owns a block of the vocabulary with Zipf-like weights plus a
// thin uniform floor over everything; documents mix topics with a peaked
// Dirichlet draw.
inline Planted planted_corpus(std::size_t k, std::size_t v, std::size_t n_docs, std::size_t doc_len, std::uint64_t seed) {
  Planted p;
  p.vocab = corpus::pseudo_words(v);
  p.topic_word = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v), 1e-4);
  const std::size_t block = v / k;
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t r = 0; r < block; ++r)
      p.topic_word(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j * block + r)) += 1.0 / (r + 1.0);
  for (Eigen::Index j = 0; j < p.topic_word.rows(); ++j) p.topic_word.row(j) /= p.topic_word.row(j).sum();

  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> g(0.2, 1.0);
  std::vector<std::discrete_distribution<std::size_t>> word_of;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> w(v);
    for (std::size_t i = 0; i < v; ++i) w[i] = p.topic_word(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    word_of.emplace_back(w.begin(), w.end());
  }
  for (std::size_t d = 0; d < n_docs; ++d) {
    std::vector<double> theta(k);
    for (auto& t : theta) t = g(rng) + 1e-9;
    std::discrete_distribution<std::size_t> pick(theta.begin(), theta.end());
    CleanDoc doc{"d" + std::to_string(d), {}};
    for (std::size_t n = 0; n < doc_len; ++n) doc.tokens.push_back(p.vocab[word_of[pick(rng)](rng)]);
    p.docs.push_back(std::move(doc));
  }
  return p;
}

inline std::vector<std::string> planted_top(const Planted& p, std::size_t j, std::size_t n) {
  std::vector<std::size_t> idx(p.vocab.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto row = p.topic_word.row(static_cast<Eigen::Index>(j));
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
    return row(static_cast<Eigen::Index>(a)) > row(static_cast<Eigen::Index>(b));
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(p.vocab[idx[i]]);
  return out;
}

// Best assignment of planted to learned topics by exhaustive permutation;
// returns the worst per-topic overlap of that assignment.
std::size_t best_min_overlap(const std::vector<std::vector<std::string>>& planted,
                             const std::vector<std::vector<std::string>>& learned) {
  std::vector<std::size_t> perm(learned.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best_total = 0, best_min = 0;
  do {
    std::size_t total = 0, mn = SIZE_MAX;
    for (std::size_t j = 0; j < planted.size(); ++j) {
      std::set<std::string> a(planted[j].begin(), planted[j].end());
      std::size_t shared = 0;
      for (const auto& w : learned[perm[j]]) shared += a.count(w);
      total += shared;
      mn = std::min(mn, shared);
    }
    if (total > best_total || (total == best_total && mn > best_min)) {
      best_total = total;
      best_min = mn;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best_min;
}

// --- veracity

// Scripted classifier: listed ids are Fake.
struct Scripted final : veracity::Classifier {
  std::set<std::string> fakes;
  veracity::VeracityVerdict classify(const veracity::ContentRef& c) override {
    const bool f = fakes.count(c.id) > 0;
    return {c.id, f ? veracity::Veracity::Fake : veracity::Veracity::Real, f ? 0.9 : 0.1};
  }
};

}  // namespace oracle
