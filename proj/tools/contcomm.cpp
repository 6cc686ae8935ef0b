// contcomm: command-line front end for the hazard community pipeline.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "contcomm/bench.hpp"
#include "contcomm/corpus.hpp"
#include "contcomm/liveness.hpp"
#include "contcomm/pipeline.hpp"
#include "contcomm/server.hpp"
#include "contcomm/topics.hpp"

using namespace contcomm;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

gateway::PipelineConfig config_or_default(const std::string& path) {
  return path.empty() ? gateway::PipelineConfig{} : gateway::load_config(path);
}

int cmd_ingest(const std::string& dict_path, const std::string& source, std::uint64_t seed, std::size_t count,
               const std::string& out_path) {
  auto dict = std::make_shared<corpus::HazardDictionary>(corpus::load_dictionary(dict_path));
  corpus::StreamSource src;
  if (source == "synthetic") {
    src.kind = corpus::StreamSource::Kind::Synthetic;
    src.synthetic = corpus::hydro_synthetic_config(seed, count);
  } else {
    src.path = source;
  }
  auto stream = corpus::open_stream(src, dict);
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw Error(ErrorCode::Io, "cannot write " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  while (auto rec = stream->next()) out << corpus::to_json_line(*rec) << '\n';
  const auto& st = stream->stats();
  std::cerr << "read " << st.read << ", accepted " << st.accepted << ", rejected " << st.rejected << ", malformed "
            << st.malformed << '\n';
  return 0;
}

int cmd_synth(std::uint64_t seed, std::size_t count, const std::string& out_path) {
  corpus::SyntheticStream stream(corpus::hydro_synthetic_config(seed, count));
  std::ofstream out(out_path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + out_path);
  while (auto rec = stream.next()) out << corpus::to_json_line(*rec) << '\n';
  return 0;
}

int cmd_replay(const std::string& config_path, const std::string& source, const std::string& report_path,
               bool verbose) {
  auto cfg = config_or_default(config_path);
  if (!source.empty()) cfg.source = source;
  cfg.retrain_in_background = false;  // replay must be reproducible
  auto res = gateway::load_resources(cfg);
  SimulatedClock clock;
  gateway::Pipeline pipeline(cfg, res.classifier, clock, res.gazetteer, res.stopwords);
  gateway::StreamRunner runner(pipeline, gateway::make_opener(cfg, res.dictionary));
  const auto outcomes = runner.replay(&clock);
  std::size_t quarantined = 0, fakes = 0;
  for (const auto& o : outcomes) {
    quarantined += o.quarantined;
    fakes += o.fake_removed;
    if (verbose)
      std::cerr << "batch " << o.batch_id << ": " << o.records << " records, " << o.fake_removed << " fake, "
                << o.communities.size() << " communities, " << o.events.size() << " pin events"
                << (o.quarantined ? " (quarantined)" : "") << '\n';
  }
  const auto report = pipeline.community_report().dump(2);
  if (report_path.empty()) {
    std::cout << report << '\n';
  } else {
    std::ofstream out(report_path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + report_path);
    out << report << '\n';
  }
  std::cerr << runner.progress() << " records in " << outcomes.size() << " batches, " << fakes
            << " fake removals, " << quarantined << " quarantined, " << pipeline.pins().size() << " pins\n";
  return quarantined ? 2 : 0;
}

int cmd_serve(const std::string& config_path, std::optional<int> port) {
  auto cfg = config_or_default(config_path);
  if (port) cfg.port = *port;
  auto res = gateway::load_resources(cfg);
  SystemClock clock;
  gateway::Pipeline pipeline(cfg, res.classifier, clock, res.gazetteer, res.stopwords);
  gateway::StreamRunner runner(pipeline, gateway::make_opener(cfg, res.dictionary));
  gateway::LivenessMonitor liveness(
      cfg.liveness_interval, [&] { return runner.progress(); }, [&] { runner.reopen(); }, clock);
  gateway::GatewayServer server(pipeline, &liveness);
  const int bound = server.bind(cfg.host, cfg.port);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  runner.start();
  liveness.start();
  server.start();
  std::cerr << "serving on http://" << cfg.host << ":" << bound << '\n';
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  std::cerr << "shutting down\n";
  server.stop();
  liveness.stop();
  runner.stop();
  return 0;
}

std::vector<std::size_t> parse_levels(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) {
    if (part.empty()) continue;
    out.push_back(std::stoul(part));
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "empty grid");
  return out;
}

int cmd_bench(std::size_t writers, std::size_t readers, bench::BenchOptions opt) {
  const auto rep = bench::run_cell(writers, readers, opt);
  std::cout << json{{"writers", rep.writers}, {"readers", rep.readers}, {"runs", rep.runs}, {"mean_s", rep.mean_s},
                    {"stdev_s", rep.stdev_s}, {"samples", rep.samples}, {"durable", rep.durable}}
                   .dump(2)
            << '\n';
  return rep.durable ? 0 : 1;
}

int cmd_bench_grid(const std::string& grid, bench::BenchOptions opt, const std::string& out_path) {
  const auto cells = bench::square_grid(parse_levels(grid));
  const auto reports = bench::run_grid(cells, opt, [](const bench::BenchReport& r) {
    std::cerr << r.writers << " x " << r.readers << ": " << r.mean_s << " s\n";
  });
  bench::write_table(std::cout, reports);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + out_path);
    bench::write_csv(out, reports);
  }
  bool durable = true;
  for (const auto& r : reports) durable = durable && r.durable;
  if (!durable) std::cerr << "some acknowledged writes were lost\n";
  return durable ? 0 : 1;
}

int cmd_topics(const std::string& corpus_path, std::size_t k, std::size_t passes, std::uint64_t seed) {
  corpus::FileReplayStream stream(corpus_path);
  std::vector<textprep::CleanDoc> docs;
  while (auto rec = stream.next()) {
    auto d = textprep::make_clean_doc(rec->id, rec->text);
    if (!d.tokens.empty()) docs.push_back(std::move(d));
  }
  topics::OldaOptions opt;
  opt.k = k;
  opt.seed = seed;
  const auto model = topics::train(docs, opt, passes, 256);
  topics::write_topic_report(std::cout, model, 10);
  const auto cv = topics::coherence_cv(model, docs);
  std::cout << "log_perplexity " << topics::log_perplexity(model, docs) << "\nperplexity "
            << topics::perplexity(model, docs) << "\nc_v " << cv.mean << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Real-time hazard community detection over tweet streams"};
  app.require_subcommand(1);

  std::string dict, source = "synthetic", out;
  std::uint64_t seed = 42;
  std::size_t count = 1000;
  auto* ingest = app.add_subcommand("ingest", "Filter a stream by a hazard dictionary into JSON lines");
  ingest->add_option("--dict", dict, "Hazard dictionary")->required()->check(CLI::ExistingFile);
  ingest->add_option("--source", source, "JSON-lines file or 'synthetic'");
  ingest->add_option("--seed", seed, "Synthetic seed");
  ingest->add_option("--count", count, "Synthetic record count");
  ingest->add_option("--out", out, "Output file (default stdout)");

  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic hydrological stream");
  synth->add_option("--seed", seed, "Seed");
  synth->add_option("--count", count, "Records");
  synth->add_option("--out", synth_out, "Output file")->required();

  std::string config_path, replay_source, report;
  bool verbose = false;
  auto* replay = app.add_subcommand("replay", "Run the pipeline over a recorded stream on simulated time");
  replay->add_option("--source", replay_source, "JSON-lines file (overrides the config)");
  replay->add_option("--config", config_path, "Pipeline config JSON")->check(CLI::ExistingFile);
  replay->add_option("--report", report, "Write the community report here");
  replay->add_flag("-v,--verbose", verbose, "Per-batch summary");

  std::optional<int> port;
  auto* serve = app.add_subcommand("serve", "Run the live pipeline with the HTTP/SSE gateway");
  serve->add_option("--config", config_path, "Pipeline config JSON")->check(CLI::ExistingFile);
  serve->add_option("--port", port, "Override the configured port");

  std::size_t writers = 0, readers = 0;
  bench::BenchOptions bopt;
  auto* bench_cmd = app.add_subcommand("bench", "Time concurrent writers and readers on a fresh store");
  bench_cmd->add_option("--writers", writers, "Writer tasks")->required();
  bench_cmd->add_option("--readers", readers, "Reader tasks")->required();
  bench_cmd->add_option("--runs", bopt.runs, "Executions")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--threads", bopt.threads, "Pool threads (0 = hardware)");

  std::string grid = "100,1000,10000,100000", csv;
  auto* grid_cmd = app.add_subcommand("bench-grid", "Writers x readers grid");
  grid_cmd->add_option("--grid", grid, "Comma-separated levels");
  grid_cmd->add_option("--runs", bopt.runs, "Executions per cell")->check(CLI::PositiveNumber);
  grid_cmd->add_option("--threads", bopt.threads, "Pool threads (0 = hardware)");
  grid_cmd->add_option("--out", csv, "CSV output");

  std::string corpus_path;
  std::size_t k = 3, passes = 10;
  std::uint64_t topic_seed = 1;
  auto* topics_cmd = app.add_subcommand("topics", "Fit topics on a JSON-lines corpus and report metrics");
  topics_cmd->add_option("--corpus", corpus_path, "JSON-lines records")->required()->check(CLI::ExistingFile);
  topics_cmd->add_option("-k", k, "Topics");
  topics_cmd->add_option("--passes", passes, "Passes");
  topics_cmd->add_option("--seed", topic_seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(dict, source, seed, count, out);
    if (*synth) return cmd_synth(seed, count, synth_out);
    if (*replay) return cmd_replay(config_path, replay_source, report, verbose);
    if (*serve) return cmd_serve(config_path, port);
    if (*bench_cmd) return cmd_bench(writers, readers, bopt);
    if (*grid_cmd) return cmd_bench_grid(grid, bopt, csv);
    if (*topics_cmd) return cmd_topics(corpus_path, k, passes, topic_seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
