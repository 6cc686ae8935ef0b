#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "contcomm/socialgraph.hpp"
#include "contcomm/textprep.hpp"

namespace contcomm::topics {

inline constexpr double kMembershipThreshold = 0.5;

/// Sparse bag of words over a model vocabulary.
struct Bow {
  std::vector<int> ids;
  std::vector<double> counts;

  double total() const;
  bool empty() const { return ids.empty(); }
};

/// Out-of-vocabulary tokens are dropped.
Bow to_bow(const std::vector<std::string>& tokens, const textprep::Vocabulary& vocab);

/// Sorted vocabulary over all tokens with document frequencies. With
/// max_features > 0 only the most frequent terms by total count are kept.
textprep::Vocabulary count_vocabulary(const std::vector<textprep::CleanDoc>& docs, std::size_t max_features = 0);

struct OldaOptions {
  std::size_t k = 3;
  // Learning rate rho_t = (tau0 + t)^-kappa. tau0 = 1024 with kappa = 0.7
  // locks onto merged topics on corpora of a few thousand short documents.
  double tau0 = 1.0;
  double kappa = 0.5;
  double estep_tolerance = 1e-4;
  int estep_max_iterations = 100;
  bool auto_alpha = true;
  bool auto_eta = true;
  double alpha = 0.0;  // initial symmetric prior; <= 0 means 1/k
  double eta = 0.0;    // <= 0 means 1/k
  /// Number of documents the stream is assumed to hold; the sufficient
  /// statistics of a batch are scaled by corpus_size / batch_size. 0 uses
  /// the batch size.
  double corpus_size = 0.0;
  std::uint64_t seed = 1;
};

/// Online variational-Bayes LDA state. lambda holds the variational
/// topic-word parameters; topic_word() is its row-normalised form.
class TopicModel {
 public:
  TopicModel() = default;
  TopicModel(textprep::Vocabulary vocab, const OldaOptions& options);

  std::size_t k() const { return static_cast<std::size_t>(lambda_.rows()); }
  std::size_t vocabulary_size() const { return static_cast<std::size_t>(lambda_.cols()); }
  const textprep::Vocabulary& vocabulary() const { return vocab_; }
  const OldaOptions& options() const { return options_; }
  const Eigen::MatrixXd& lambda() const { return lambda_; }
  const Eigen::MatrixXd& exp_elog_beta() const { return exp_elog_beta_; }
  Eigen::MatrixXd topic_word() const;
  const Eigen::VectorXd& alpha() const { return alpha_; }
  double eta() const { return eta_; }
  std::uint64_t update_count() const { return update_count_; }

  /// Top-n (term, probability) pairs of topic j, probability descending,
  /// ties by term.
  std::vector<std::pair<std::string, double>> top_words(std::size_t j, std::size_t n = 10) const;

  /// Builds a model directly from a parameter matrix (tests, snapshots).
  static TopicModel from_lambda(textprep::Vocabulary vocab, Eigen::MatrixXd lambda, Eigen::VectorXd alpha,
                                double eta, std::uint64_t update_count, const OldaOptions& options = {});

  friend TopicModel fit_online(const TopicModel& model, const std::vector<Bow>& batch);

 private:
  void refresh();

  textprep::Vocabulary vocab_;
  OldaOptions options_;
  Eigen::MatrixXd lambda_;
  Eigen::MatrixXd exp_elog_beta_;
  Eigen::VectorXd alpha_;
  double eta_ = 0.0;
  std::uint64_t update_count_ = 0;
};

/// Variational posterior of one document under frozen topics.
struct DocPosterior {
  Eigen::VectorXd gamma;
  int iterations = 0;
};

DocPosterior e_step(const TopicModel& model, const Bow& doc);

/// One online update. Empty documents are skipped, but the update counter
/// still advances. Throws VocabularyMismatch on ids outside the vocabulary,
/// EmptyCorpus on an empty batch.
TopicModel fit_online(const TopicModel& model, const std::vector<Bow>& batch);
TopicModel fit_online(const TopicModel& model, const std::vector<textprep::CleanDoc>& batch);

/// Fits a fresh model: vocabulary from `docs`, then `passes` sweeps of
/// minibatches of `batch_size` in input order.
TopicModel train(const std::vector<textprep::CleanDoc>& docs, const OldaOptions& options, std::size_t passes,
                 std::size_t batch_size, std::size_t max_features = 0);

enum class MembershipRule { Posterior, Cosine };

struct TopicMembership {
  std::string doc_id;
  Eigen::VectorXd theta;
  std::set<std::size_t> members;
};

/// theta from the E-step; members are topics with theta_j >= eps_c. With
/// the Cosine rule membership instead compares the cosine between the
/// document's term counts and each topic's word distribution to eps_c.
/// A document with no in-vocabulary token belongs to no topic.
TopicMembership infer(const TopicModel& model, const textprep::CleanDoc& doc, double eps_c = kMembershipThreshold,
                      MembershipRule rule = MembershipRule::Posterior);

struct TopicGraph {
  std::size_t topic = 0;
  socialgraph::SocialGraph graph;
};

/// One graph per topic over the member nodes of all input graphs; an edge
/// is kept only when both endpoints are members.
std::vector<TopicGraph> topic_graphs(const std::vector<socialgraph::SocialGraph>& graphs,
                                     const std::map<std::string, std::set<std::size_t>>& members, std::size_t k);
std::vector<TopicGraph> topic_graphs(const std::vector<socialgraph::SocialGraph>& graphs, const TopicModel& model,
                                     double eps_c = kMembershipThreshold,
                                     MembershipRule rule = MembershipRule::Posterior);

/// exp(-bound / tokens), bound from the per-document variational lower
/// bound with the topic-word point estimate. Throws EmptyCorpus.
double perplexity(const TopicModel& model, const std::vector<Bow>& docs);
double perplexity(const TopicModel& model, const std::vector<textprep::CleanDoc>& docs);

/// Negative per-token bound, i.e. ln(perplexity).
double log_perplexity(const TopicModel& model, const std::vector<textprep::CleanDoc>& docs);

struct CoherenceOptions {
  std::size_t top_n = 10;
  std::size_t window = 110;
  double epsilon = 1e-12;
};

/// C_V of one word set against a reference corpus: boolean sliding window
/// counts, NPMI context vectors, one-set segmentation, mean cosine.
/// Throws InsufficientReference when a word never occurs.
double coherence_cv(const std::vector<std::string>& words, const std::vector<textprep::CleanDoc>& reference,
                    const CoherenceOptions& options = {});

struct CoherenceReport {
  std::vector<double> per_topic;
  double mean = 0.0;
};

CoherenceReport coherence_cv(const TopicModel& model, const std::vector<textprep::CleanDoc>& reference,
                             const CoherenceOptions& options = {});

/// `# topic j` followed by top-n `word<TAB>probability` rows.
void write_topic_report(std::ostream& out, const TopicModel& model, std::size_t top_n = 10);

nlohmann::json to_json(const TopicModel& model);
TopicModel model_from_json(const nlohmann::json& j);

/// Active model holder; retraining swaps in a successor while readers keep
/// the snapshot they took.
class ModelSlot {
 public:
  ModelSlot() = default;
  explicit ModelSlot(std::shared_ptr<const TopicModel> m) : model_(std::move(m)) {}

  std::shared_ptr<const TopicModel> snapshot() const {
    std::lock_guard lock(mu_);
    return model_;
  }
  void swap(std::shared_ptr<const TopicModel> next) {
    std::lock_guard lock(mu_);
    model_ = std::move(next);
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const TopicModel> model_;
};

}  // namespace contcomm::topics
