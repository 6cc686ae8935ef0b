#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <utility>
#include <vector>

#include "contcomm/store.hpp"

namespace contcomm::bench {

struct BenchOptions {
  std::size_t runs = 10;
  std::uint64_t seed = 1;
  /// Pool threads executing the writer/reader tasks; 0 = hardware threads
  /// (at least 2).
  std::size_t threads = 0;
  relay::StoreOptions store{};
  std::size_t topics = 3;
  /// A sample shorter than this is re-executed until the total reaches it and
  /// reported per execution; sub-millisecond cells are otherwise mostly
  /// scheduler jitter. 0 times each execution once.
  double min_sample_s = 0.005;
};

struct RunResult {
  double seconds = 0.0;
  std::size_t writes_acknowledged = 0;
  std::size_t tweets_found = 0;        // documents in the tweets collection afterwards
  std::size_t topic_entries_found = 0; // entries across topic documents afterwards
  bool durable() const {
    return tweets_found == writes_acknowledged && topic_entries_found == writes_acknowledged;
  }
};

struct BenchReport {
  std::size_t writers = 0;
  std::size_t readers = 0;
  std::size_t runs = 0;
  double mean_s = 0.0;
  double stdev_s = 0.0;  // sample stdev; 0 for a single run
  std::vector<double> samples;
  bool durable = true;   // every run kept every acknowledged write
};

/// One execution on a cold store: `writers` tasks each insert a tweet and
/// append it to its topic document; `readers` tasks each count the tweets of
/// one topic. Tasks are shuffled and run concurrently on the pool; the time
/// covers the tasks only.
RunResult run_once(std::size_t writers, std::size_t readers, const BenchOptions& options, std::uint64_t run_index = 0);

/// One untimed warm-up execution, then `runs` timed ones.
BenchReport run_cell(std::size_t writers, std::size_t readers, const BenchOptions& options);

using Cell = std::pair<std::size_t, std::size_t>;  // writers, readers

/// Every (writers, readers) pair over `levels`, writers-major.
std::vector<Cell> square_grid(const std::vector<std::size_t>& levels);

/// Cells run one after another, each on fresh stores.
std::vector<BenchReport> run_grid(const std::vector<Cell>& grid, const BenchOptions& options,
                                  const std::function<void(const BenchReport&)>& on_cell = {});

/// Rank correlation with average ranks for ties. Throws InvalidArgument on
/// length mismatch or fewer than 2 values.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// For every writer level, means must not drop by more than `tolerance`
/// (relative) as readers grow.
bool monotone_in_readers(const std::vector<BenchReport>& reports, double tolerance = 0.1);

/// `writers,readers,mean_s,stdev_s`
void write_csv(std::ostream& out, const std::vector<BenchReport>& reports);

/// Writers down, readers across, "mean ± stdev" seconds per cell.
void write_table(std::ostream& out, const std::vector<BenchReport>& reports);

}  // namespace contcomm::bench
