#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "contcomm/broker.hpp"
#include "contcomm/communities.hpp"
#include "contcomm/corpus.hpp"
#include "contcomm/gateway.hpp"
#include "contcomm/geoloc.hpp"
#include "contcomm/socialgraph.hpp"
#include "contcomm/store.hpp"
#include "contcomm/textprep.hpp"
#include "contcomm/topics.hpp"
#include "contcomm/veracity.hpp"

namespace contcomm::gateway {

struct BatchOutcome {
  std::uint64_t batch_id = 0;
  std::size_t records = 0;     // new records taken into the graph
  std::size_t duplicates = 0;  // ids seen before
  std::size_t fake_removed = 0;
  int attempts = 0;
  bool quarantined = false;
  std::string error;
  std::vector<communities::CommunityGraph> communities;  // all live ones after the batch
  std::vector<PinEvent> events;
};

/// The micro-batch pipeline: resolve and preprocess records, grow the
/// social graph, drop fake nodes, split by topic, cluster by place, update
/// pins. Everything except the optional background retrain runs on the
/// caller's thread, one batch at a time.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::shared_ptr<veracity::Classifier> classifier, const Clock& clock,
           geoloc::Gazetteer gazetteer = {}, textprep::StopWords stopwords = textprep::StopWords::english());
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  /// One attempt; errors carry the batch id in their message.
  BatchOutcome process(const std::vector<corpus::TweetRecord>& batch);

  /// process() with one retry; a batch failing twice is appended to the
  /// dead-letter file and its records are left out of the graph.
  BatchOutcome run_batch(const std::vector<corpus::TweetRecord>& batch);

  /// Drops pins whose newest member is older than the retention window and
  /// pushes the removals.
  std::vector<PinEvent> expire_pins();

  /// Trains on every non-fake tweet kept in the tweets collection and swaps
  /// the model in. Returns false when there is too little text.
  bool retrain();
  void set_model(std::shared_ptr<const topics::TopicModel> model);
  std::shared_ptr<const topics::TopicModel> model() const { return model_.snapshot(); }
  /// Waits for a background retrain, if one runs.
  void wait_for_retrain();

  /// Test hook, called before each attempt; throwing fails the attempt.
  void set_fault_hook(std::function<void(std::uint64_t batch_id, int attempt)> hook) { fault_ = std::move(hook); }

  const PipelineConfig& config() const { return config_; }
  const Clock& clock() const { return clock_; }
  PinBoard& pins() { return pins_; }
  const PinBoard& pins() const { return pins_; }
  SubscriptionHub& hub() { return hub_; }
  relay::Store& store() { return store_; }
  relay::Broker& broker() { return broker_; }
  const relay::TopicCollection& topic_collection() const { return topic_collection_; }

  std::vector<communities::CommunityGraph> communities() const;
  /// Live communities, ordered by topic then area id.
  nlohmann::json community_report() const;
  /// Top words per topic, empty before the first model.
  nlohmann::json topics_report(std::size_t top_n = 10) const;
  nlohmann::json health() const;
  std::uint64_t batches() const { return batches_.load(); }
  std::size_t working_nodes() const;

 private:
  void attempt(const std::vector<corpus::TweetRecord>& batch, BatchOutcome& out);
  void relay_memberships(const std::map<std::string, std::set<std::size_t>>& members,
                         const socialgraph::SocialGraph& clean);
  std::vector<textprep::CleanDoc> training_docs() const;
  std::shared_ptr<topics::TopicModel> fit(const std::vector<textprep::CleanDoc>& docs) const;
  void maybe_retrain(Timestamp now);
  void dead_letter(const BatchOutcome& out, const std::vector<corpus::TweetRecord>& batch);

  PipelineConfig config_;
  std::shared_ptr<veracity::Classifier> classifier_;
  const Clock& clock_;
  geoloc::Gazetteer gazetteer_;
  textprep::StopWords stopwords_;

  relay::Store store_;
  relay::Broker broker_;
  relay::TopicCollection topic_collection_;
  PinBoard pins_;
  SubscriptionHub hub_;
  topics::ModelSlot model_;

  mutable std::mutex state_mu_;  // one batch at a time; guards the working set
  socialgraph::GraphBuilder builder_;
  std::map<std::string, Timestamp> seen_;  // ids in the window
  std::unordered_map<std::string, veracity::VeracityVerdict> verdicts_;
  std::unordered_map<std::string, std::set<std::size_t>> relayed_;
  Timestamp last_trained_{};
  bool trained_once_ = false;

  mutable std::mutex view_mu_;  // what the API reads, so queries never wait on a batch
  std::vector<communities::CommunityGraph> live_;
  std::size_t fakes_ = 0;
  std::size_t quarantined_ = 0;
  Timestamp last_batch_at_{};

  std::atomic<std::uint64_t> batches_{0};
  std::function<void(std::uint64_t, int)> fault_;
  std::mutex retrain_mu_;
  std::jthread retrain_thread_;
};

/// Feeds a pipeline from a record stream. replay() is synchronous and
/// drives a simulated clock from record timestamps; start() runs a reader
/// thread plus a batching thread on real time for serve mode.
class StreamRunner {
 public:
  using Opener = std::function<std::unique_ptr<corpus::TweetStream>()>;

  StreamRunner(Pipeline& pipeline, Opener open);
  ~StreamRunner();

  /// Reads the whole stream; a batch closes when the next record is more
  /// than batch_interval of record time past the batch's first record, or
  /// at max_batch records (batch_interval 0 = one record per batch).
  /// `clock`, when given, is set to each batch's newest timestamp before
  /// the batch runs. Returns the outcomes in order.
  std::vector<BatchOutcome> replay(SimulatedClock* clock = nullptr);

  void start();
  void stop();

  /// Records read since construction; the liveness probe.
  std::uint64_t progress() const { return progress_.load(); }
  /// Asks the reader to close and reopen the source.
  void reopen() { reopen_requested_ = true; }
  std::uint64_t reopens() const { return reopens_.load(); }

 private:
  void reader_loop(std::stop_token st);
  void batch_loop(std::stop_token st);
  void flush();

  Pipeline& pipeline_;
  Opener open_;
  std::atomic<std::uint64_t> progress_{0};
  std::atomic<bool> reopen_requested_{false};
  std::atomic<std::uint64_t> reopens_{0};
  std::mutex buffer_mu_;
  std::vector<corpus::TweetRecord> buffer_;
  std::jthread reader_;
  std::jthread batcher_;
};

/// Labels everything Real; stands in when no veracity model is configured.
class AcceptAllClassifier final : public veracity::Classifier {
 public:
  veracity::VeracityVerdict classify(const veracity::ContentRef& c) override {
    return {c.id, veracity::Veracity::Real, 0.0};
  }
};

/// What a config points at, loaded.
struct Resources {
  std::shared_ptr<const corpus::HazardDictionary> dictionary;  // null = no keyword filter
  geoloc::Gazetteer gazetteer;
  textprep::StopWords stopwords = textprep::StopWords::english();
  std::shared_ptr<veracity::Classifier> classifier;
  std::optional<veracity::Evaluation> veracity_test;  // when trained from a TSV
};

/// Classifier precedence: remote endpoint, saved model, training TSV,
/// accept-all.
Resources load_resources(const PipelineConfig& config);

/// Opens `config.source` ("synthetic" or a JSON-lines file), filtered by
/// the dictionary when there is one.
StreamRunner::Opener make_opener(const PipelineConfig& config,
                                 std::shared_ptr<const corpus::HazardDictionary> dictionary);

}  // namespace contcomm::gateway
