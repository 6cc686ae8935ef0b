#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "contcomm/corpus.hpp"
#include "contcomm/socialgraph.hpp"
#include "contcomm/textprep.hpp"

namespace contcomm::veracity {

using corpus::Veracity;

/// Fake iff score > threshold; the boundary is Real.
inline constexpr double kDecisionThreshold = 0.5;

struct VeracityVerdict {
  std::string doc_id;
  Veracity label = Veracity::Unchecked;
  double score = 0.0;  // probability of Fake
};

inline Veracity label_for(double score, double threshold = kDecisionThreshold) {
  return score > threshold ? Veracity::Fake : Veracity::Real;
}

struct LabeledDoc {
  textprep::CleanDoc doc;
  bool fake = false;
};

/// TSV `label<TAB>text`, label in {fake, real}; texts are preprocessed.
/// Doc ids are the 1-based line numbers.
std::vector<LabeledDoc> load_labeled_tsv(const std::filesystem::path& path,
                                         const textprep::StopWords& stop = textprep::StopWords::english());

struct LinearFakeNewsModel {
  textprep::Vocabulary vocabulary;
  Eigen::VectorXd weights;
  double bias = 0.0;
  std::string trained_on;  // dataset fingerprint

  double score(const textprep::SparseVector& x) const;
};

struct TrainOptions {
  double train_fraction = 0.7;
  std::uint64_t seed = 7;
  std::size_t max_features = 5000;
  std::size_t epochs = 15;
  double learning_rate = 0.5;
  double l2 = 1e-4;
};

struct Evaluation {
  std::size_t n = 0;
  double accuracy = 0.0;
  double precision = 0.0;  // of the Fake class
  double recall = 0.0;
  double f1 = 0.0;
};

struct TrainResult {
  LinearFakeNewsModel model;
  Evaluation test;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

/// Stratified train/test split (class ratio preserved, per-class seeded
/// shuffle), TF-IDF fit on the training part, logistic regression by SGD.
/// Throws EmptyCorpus / SingleClassCorpus / InvalidArgument.
TrainResult train_linear(const std::vector<LabeledDoc>& docs, const TrainOptions& options = {});

/// Fits on all of `train` and evaluates on `test` (no split).
TrainResult train_linear(const std::vector<LabeledDoc>& train, const std::vector<LabeledDoc>& test,
                         const TrainOptions& options);

Evaluation evaluate(const LinearFakeNewsModel& model, const std::vector<LabeledDoc>& docs);

/// Throws VocabularyMismatch when weights and vocabulary disagree in size.
VeracityVerdict classify(const textprep::CleanDoc& doc, const LinearFakeNewsModel& model);

/// Content handed to a classifier: id, preprocessed tokens and raw text.
struct ContentRef {
  const std::string& id;
  const std::vector<std::string>& tokens;
  const std::string& text;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual VeracityVerdict classify(const ContentRef& content) = 0;
};

/// Holds the active linear model; `swap` replaces it atomically while
/// in-flight classifications finish on the snapshot they started with.
class LinearClassifier final : public Classifier {
 public:
  explicit LinearClassifier(std::shared_ptr<const LinearFakeNewsModel> model) : model_(std::move(model)) {}

  VeracityVerdict classify(const ContentRef& content) override;
  void swap(std::shared_ptr<const LinearFakeNewsModel> next);
  std::shared_ptr<const LinearFakeNewsModel> snapshot() const;

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const LinearFakeNewsModel> model_;
};

enum class Fallback { PassThrough, MarkUnchecked };

struct RemoteClassifierSpec {
  std::string endpoint;  // e.g. http://127.0.0.1:8088/classify
  Millis timeout{2000};
  Fallback fallback = Fallback::PassThrough;
};

struct RemoteStats {
  std::atomic<std::size_t> calls{0};
  std::atomic<std::size_t> timeouts{0};
  std::atomic<std::size_t> bad_responses{0};
  std::atomic<std::size_t> unreachable{0};
};

/// POSTs {"id","text"} and expects {"score": x}. Failures are routed to the
/// spec's fallback and counted; PassThrough yields Real with score 0.
VeracityVerdict classify_remote(const std::string& id, const std::string& text, const RemoteClassifierSpec& spec,
                                RemoteStats* stats = nullptr);

class RemoteClassifier final : public Classifier {
 public:
  explicit RemoteClassifier(RemoteClassifierSpec spec) : spec_(std::move(spec)) {}
  VeracityVerdict classify(const ContentRef& content) override {
    return classify_remote(content.id, content.text, spec_, &stats_);
  }
  const RemoteStats& stats() const { return stats_; }

 private:
  RemoteClassifierSpec spec_;
  RemoteStats stats_;
};

struct FilterResult {
  std::vector<socialgraph::SocialGraph> graphs;
  std::vector<VeracityVerdict> verdicts;  // one per input node, graph order
  std::set<socialgraph::NodeId> removed;
};

/// Classifies every node and removes Fake ones with their edges. `on_verdict`
/// (optional) persists each verdict, e.g. into the tweets collection.
FilterResult filter_graph(const std::vector<socialgraph::SocialGraph>& graphs, Classifier& classifier,
                          const std::function<void(const VeracityVerdict&)>& on_verdict = {});

nlohmann::json to_json(const LinearFakeNewsModel& model);
LinearFakeNewsModel model_from_json(const nlohmann::json& j);

}  // namespace contcomm::veracity
