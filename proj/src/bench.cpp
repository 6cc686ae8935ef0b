#include "contcomm/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace contcomm::bench {

using relay::Document;

namespace {

constexpr const char* kTweets = "tweets";
constexpr const char* kTopics = "topics";

std::size_t pool_size(const BenchOptions& o) {
  if (o.threads > 0) return o.threads;
  return std::max<std::size_t>(2, std::thread::hardware_concurrency());
}

struct Task {
  bool write;
  std::size_t index;
};

}  // namespace

RunResult run_once(std::size_t writers, std::size_t readers, const BenchOptions& options, std::uint64_t run_index) {
  if (options.topics == 0) throw Error(ErrorCode::InvalidArgument, "bench needs at least one topic");
  relay::Store store(options.store);

  std::mt19937_64 rng(options.seed * 1000003u + run_index);
  std::vector<Task> tasks;
  tasks.reserve(writers + readers);
  for (std::size_t i = 0; i < writers; ++i) tasks.push_back({true, i});
  for (std::size_t i = 0; i < readers; ++i) tasks.push_back({false, i});
  std::shuffle(tasks.begin(), tasks.end(), rng);

  // Write payloads are prepared up front so the clock sees only store work.
  std::uniform_real_distribution<double> lat(-60.0, 70.0), lon(-180.0, 180.0);
  std::vector<GeoPoint> where(writers);
  for (auto& p : where) p = {lat(rng), lon(rng), GeoSource::Device};

  std::atomic<std::size_t> next{0}, acknowledged{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) {
      const auto& t = tasks[i];
      const std::size_t topic = t.index % options.topics;
      if (t.write) {
        const auto id = "b" + std::to_string(t.index);
        const auto& p = where[t.index];
        store.put(kTweets, id,
                  Document{{"id", id}, {"text", "bench tweet " + id}, {"topic", topic}, {"lat", p.lat}, {"lon", p.lon}},
                  p);
        store.append_unique(kTopics, "topic-" + std::to_string(topic), "tweets", Document{{"tweet_id", id}}, id,
                            GeoPoint::unresolved());
        acknowledged.fetch_add(1);
      } else {
        std::size_t n = 0;
        store.for_each(kTweets, [&](const std::string&, const Document& d) { n += d.value("topic", SIZE_MAX) == topic; });
        (void)n;
      }
    }
  };

  const auto start = std::chrono::steady_clock::now();
  {
    std::vector<std::jthread> pool;
    const auto n = std::min(pool_size(options), std::max<std::size_t>(tasks.size(), 1));
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  const auto stop = std::chrono::steady_clock::now();

  RunResult r;
  r.seconds = std::chrono::duration<double>(stop - start).count();
  r.writes_acknowledged = acknowledged.load();
  r.tweets_found = store.count(kTweets);
  store.for_each(kTopics, [&](const std::string&, const Document& d) {
    if (auto it = d.find("tweets"); it != d.end()) r.topic_entries_found += it->size();
  });
  return r;
}

BenchReport run_cell(std::size_t writers, std::size_t readers, const BenchOptions& options) {
  if (options.runs == 0) throw Error(ErrorCode::InvalidArgument, "runs must be positive");
  BenchReport rep;
  rep.writers = writers;
  rep.readers = readers;
  rep.runs = options.runs;
  // Untimed first execution: page faults and allocator growth otherwise
  // land on whichever cell happens to run first.
  (void)run_once(writers, readers, options, options.runs);
  for (std::size_t i = 0; i < options.runs; ++i) {
    double total = 0.0;
    std::size_t reps = 0;
    do {
      const auto r = run_once(writers, readers, options, i + reps * options.runs);
      total += r.seconds;
      ++reps;
      rep.durable = rep.durable && r.durable() && r.writes_acknowledged == writers;
    } while (total < options.min_sample_s);
    rep.samples.push_back(total / static_cast<double>(reps));
  }
  const double n = static_cast<double>(rep.samples.size());
  rep.mean_s = std::accumulate(rep.samples.begin(), rep.samples.end(), 0.0) / n;
  if (rep.samples.size() > 1) {
    double ss = 0.0;
    for (double s : rep.samples) ss += (s - rep.mean_s) * (s - rep.mean_s);
    rep.stdev_s = std::sqrt(ss / (n - 1.0));
  }
  return rep;
}

std::vector<Cell> square_grid(const std::vector<std::size_t>& levels) {
  std::vector<Cell> grid;
  for (auto w : levels)
    for (auto r : levels) grid.emplace_back(w, r);
  return grid;
}

std::vector<BenchReport> run_grid(const std::vector<Cell>& grid, const BenchOptions& options,
                                  const std::function<void(const BenchReport&)>& on_cell) {
  std::vector<BenchReport> out;
  out.reserve(grid.size());
  for (const auto& [w, r] : grid) {
    out.push_back(run_cell(w, r, options));
    if (on_cell) on_cell(out.back());
  }
  return out;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw Error(ErrorCode::InvalidArgument, "spearman needs two equal-length series of at least 2");
  // Pearson correlation of the ranks (exact with ties).
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return saa == sbb ? 1.0 : 0.0;
  return sab / std::sqrt(saa * sbb);
}

bool monotone_in_readers(const std::vector<BenchReport>& reports, double tolerance) {
  std::map<std::size_t, std::map<std::size_t, double>> rows;
  for (const auto& r : reports) rows[r.writers][r.readers] = r.mean_s;
  for (const auto& [_, row] : rows) {
    double prev = -1.0;
    for (const auto& [__, mean] : row) {
      if (prev >= 0 && mean < prev * (1.0 - tolerance)) return false;
      prev = std::max(prev, mean);
    }
  }
  return true;
}

void write_csv(std::ostream& out, const std::vector<BenchReport>& reports) {
  out << "writers,readers,mean_s,stdev_s\n";
  const auto flags = out.flags();
  out << std::setprecision(6) << std::fixed;
  for (const auto& r : reports) out << r.writers << ',' << r.readers << ',' << r.mean_s << ',' << r.stdev_s << '\n';
  out.flags(flags);
}

void write_table(std::ostream& out, const std::vector<BenchReport>& reports) {
  std::set<std::size_t> readers;
  std::map<std::size_t, std::map<std::size_t, const BenchReport*>> rows;
  for (const auto& r : reports) {
    readers.insert(r.readers);
    rows[r.writers][r.readers] = &r;
  }
  const auto flags = out.flags();
  out << std::left << std::setw(16) << "writers\\readers";
  for (auto r : readers) out << std::setw(20) << r;
  out << '\n';
  out << std::fixed << std::setprecision(3);
  for (const auto& [w, row] : rows) {
    out << std::setw(16) << w;
    for (auto r : readers) {
      auto it = row.find(r);
      if (it == row.end()) {
        out << std::setw(20) << "-";
        continue;
      }
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(3) << it->second->mean_s << " ± " << it->second->stdev_s;
      out << std::setw(20) << cell.str();
    }
    out << '\n';
  }
  out.flags(flags);
}

}  // namespace contcomm::bench
