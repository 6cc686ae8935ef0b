#include "contcomm/topics.hpp"

#include <unsupported/Eigen/SpecialFunctions>

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

namespace contcomm::topics {

using Eigen::ArrayXd;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

double digamma(double x) { return Eigen::numext::digamma(x); }
double trigamma(double x) { return Eigen::numext::polygamma(1.0, x); }

// E[log x] under Dirichlet(v) for a single parameter vector.
VectorXd dirichlet_expectation(const VectorXd& v) {
  const double total = digamma(v.sum());
  return v.unaryExpr([&](double a) { return digamma(a) - total; });
}

double lgamma_sum(const VectorXd& v) {
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += std::lgamma(v[i]);
  return s;
}

void check_ids(const Bow& doc, std::size_t vocab_size) {
  for (int id : doc.ids)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size)
      throw Error(ErrorCode::VocabularyMismatch,
                  "term id " + std::to_string(id) + " outside a vocabulary of " + std::to_string(vocab_size));
}

std::vector<Bow> project(const std::vector<textprep::CleanDoc>& docs, const textprep::Vocabulary& vocab) {
  std::vector<Bow> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(to_bow(d.tokens, vocab));
  return out;
}

// One Newton step on a Dirichlet prior vector, as in online LDA practice.
void newton_prior(VectorXd& prior, double n, const VectorXd& logphat, double rho) {
  const ArrayXd a = prior.array();
  const ArrayXd grad = n * (digamma(a.sum()) - a.unaryExpr([](double x) { return digamma(x); }) + logphat.array());
  const double c = n * trigamma(a.sum());
  const ArrayXd q = -n * a.unaryExpr([](double x) { return trigamma(x); });
  const double b = (grad / q).sum() / (1.0 / c + (1.0 / q).sum());
  const ArrayXd step = -(grad - b) / q;
  const ArrayXd next = a + rho * step;
  if ((next > 0).all()) prior = next.matrix();
}

}  // namespace

double Bow::total() const {
  double s = 0.0;
  for (double c : counts) s += c;
  return s;
}

Bow to_bow(const std::vector<std::string>& tokens, const textprep::Vocabulary& vocab) {
  std::map<int, double> counts;
  for (const auto& t : tokens)
    if (int i = vocab.index(t); i >= 0) counts[i] += 1.0;
  Bow b;
  b.ids.reserve(counts.size());
  b.counts.reserve(counts.size());
  for (auto [i, c] : counts) {
    b.ids.push_back(i);
    b.counts.push_back(c);
  }
  return b;
}

textprep::Vocabulary count_vocabulary(const std::vector<textprep::CleanDoc>& docs, std::size_t max_features) {
  std::map<std::string, std::pair<int, long>> stats;  // term -> (df, total count)
  for (const auto& d : docs) {
    std::set<std::string_view> seen;
    for (const auto& t : d.tokens) {
      auto& s = stats[t];
      s.second += 1;
      if (seen.insert(t).second) s.first += 1;
    }
  }
  std::vector<std::string> terms;
  terms.reserve(stats.size());
  for (const auto& [t, _] : stats) terms.push_back(t);
  if (max_features > 0 && terms.size() > max_features) {
    std::stable_sort(terms.begin(), terms.end(),
                     [&](const std::string& a, const std::string& b) { return stats[a].second > stats[b].second; });
    terms.resize(max_features);
    std::sort(terms.begin(), terms.end());
  }
  std::vector<int> df;
  df.reserve(terms.size());
  for (const auto& t : terms) df.push_back(stats[t].first);
  return textprep::Vocabulary(std::move(terms), std::move(df), docs.size());
}

TopicModel::TopicModel(textprep::Vocabulary vocab, const OldaOptions& options)
    : vocab_(std::move(vocab)), options_(options) {
  if (options_.k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  if (vocab_.size() == 0) throw Error(ErrorCode::EmptyCorpus, "empty vocabulary");
  const auto k = static_cast<Index>(options_.k);
  const auto v = static_cast<Index>(vocab_.size());
  const double prior = 1.0 / static_cast<double>(options_.k);
  alpha_ = VectorXd::Constant(k, options_.alpha > 0 ? options_.alpha : prior);
  eta_ = options_.eta > 0 ? options_.eta : prior;

  std::mt19937_64 rng(options_.seed);
  std::gamma_distribution<double> init(100.0, 0.01);
  lambda_.resize(k, v);
  for (Index i = 0; i < k; ++i)
    for (Index w = 0; w < v; ++w) lambda_(i, w) = init(rng);
  refresh();
}

TopicModel TopicModel::from_lambda(textprep::Vocabulary vocab, MatrixXd lambda, VectorXd alpha, double eta,
                                   std::uint64_t update_count, const OldaOptions& options) {
  if (static_cast<std::size_t>(lambda.cols()) != vocab.size())
    throw Error(ErrorCode::VocabularyMismatch, "lambda columns differ from vocabulary size");
  if (lambda.rows() < 1 || alpha.size() != lambda.rows())
    throw Error(ErrorCode::InvalidArgument, "alpha length must equal the topic count");
  if (!(eta > 0) || !(alpha.array() > 0).all() || !(lambda.array() > 0).all())
    throw Error(ErrorCode::InvalidArgument, "priors and lambda must be positive");
  TopicModel m;
  m.vocab_ = std::move(vocab);
  m.options_ = options;
  m.options_.k = static_cast<std::size_t>(lambda.rows());
  m.lambda_ = std::move(lambda);
  m.alpha_ = std::move(alpha);
  m.eta_ = eta;
  m.update_count_ = update_count;
  m.refresh();
  return m;
}

void TopicModel::refresh() {
  exp_elog_beta_.resize(lambda_.rows(), lambda_.cols());
  for (Index i = 0; i < lambda_.rows(); ++i)
    exp_elog_beta_.row(i) = dirichlet_expectation(lambda_.row(i).transpose()).array().exp().transpose();
}

MatrixXd TopicModel::topic_word() const {
  VectorXd sums = lambda_.rowwise().sum();
  return sums.asDiagonal().inverse() * lambda_;
}

std::vector<std::pair<std::string, double>> TopicModel::top_words(std::size_t j, std::size_t n) const {
  if (j >= k()) throw Error(ErrorCode::InvalidTopic, "topic " + std::to_string(j));
  const VectorXd row = lambda_.row(static_cast<Index>(j)) / lambda_.row(static_cast<Index>(j)).sum();
  std::vector<Index> order(static_cast<std::size_t>(row.size()));
  for (Index i = 0; i < row.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  n = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](Index a, Index b) { return row[a] != row[b] ? row[a] > row[b] : a < b; });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < n; ++i)
    out.emplace_back(vocab_.term(static_cast<std::size_t>(order[i])), row[order[i]]);
  return out;
}

namespace {

struct EStepState {
  VectorXd gamma;
  VectorXd exp_elog_theta;
  VectorXd phinorm;
  MatrixXd beta_d;  // k x n columns of exp(E[log beta]) for the doc's ids
  int iterations = 0;
};

EStepState run_e_step(const TopicModel& model, const Bow& doc) {
  const auto k = static_cast<Index>(model.k());
  const auto n = static_cast<Index>(doc.ids.size());
  EStepState s;
  s.beta_d.resize(k, n);
  VectorXd cts(n);
  for (Index i = 0; i < n; ++i) {
    s.beta_d.col(i) = model.exp_elog_beta().col(doc.ids[static_cast<std::size_t>(i)]);
    cts[i] = doc.counts[static_cast<std::size_t>(i)];
  }
  const auto& opt = model.options();
  s.gamma = model.alpha().array() + cts.sum() / static_cast<double>(k);
  s.exp_elog_theta = dirichlet_expectation(s.gamma).array().exp();
  s.phinorm = (s.beta_d.transpose() * s.exp_elog_theta).array() + 1e-100;
  for (s.iterations = 0; s.iterations < opt.estep_max_iterations;) {
    ++s.iterations;
    VectorXd last = s.gamma;
    s.gamma = model.alpha().array() +
              s.exp_elog_theta.array() * (s.beta_d * (cts.array() / s.phinorm.array()).matrix()).array();
    s.exp_elog_theta = dirichlet_expectation(s.gamma).array().exp();
    s.phinorm = (s.beta_d.transpose() * s.exp_elog_theta).array() + 1e-100;
    if ((s.gamma - last).cwiseAbs().mean() < opt.estep_tolerance) break;
  }
  return s;
}

}  // namespace

DocPosterior e_step(const TopicModel& model, const Bow& doc) {
  check_ids(doc, model.vocabulary_size());
  if (doc.empty()) return {model.alpha(), 0};
  auto s = run_e_step(model, doc);
  return {std::move(s.gamma), s.iterations};
}

TopicModel fit_online(const TopicModel& model, const std::vector<Bow>& batch) {
  if (batch.empty()) throw Error(ErrorCode::EmptyCorpus, "empty batch");
  for (const auto& d : batch) check_ids(d, model.vocabulary_size());

  TopicModel next = model;
  const auto k = static_cast<Index>(model.k());
  MatrixXd sstats = MatrixXd::Zero(k, static_cast<Index>(model.vocabulary_size()));
  VectorXd logphat = VectorXd::Zero(k);
  std::size_t used = 0;
  for (const auto& doc : batch) {
    if (doc.empty()) continue;
    auto s = run_e_step(model, doc);
    for (std::size_t i = 0; i < doc.ids.size(); ++i)
      sstats.col(doc.ids[i]) += s.exp_elog_theta * (doc.counts[i] / s.phinorm[static_cast<Index>(i)]);
    logphat += dirichlet_expectation(s.gamma);
    ++used;
  }
  const double rho = std::pow(model.options_.tau0 + static_cast<double>(model.update_count_), -model.options_.kappa);
  ++next.update_count_;
  if (used == 0) return next;

  sstats = sstats.cwiseProduct(model.exp_elog_beta());
  const double n = static_cast<double>(used);
  if (model.options_.auto_alpha) newton_prior(next.alpha_, n, logphat / n, rho);

  const double scale = (model.options_.corpus_size > 0 ? model.options_.corpus_size : n) / n;
  next.lambda_ = (1.0 - rho) * model.lambda_ + rho * (MatrixXd::Constant(k, sstats.cols(), model.eta_) + scale * sstats);
  next.refresh();

  if (model.options_.auto_eta) {
    // Symmetric scalar prior: Newton step on the Dirichlet likelihood of
    // the k topic rows.
    const double v = static_cast<double>(next.vocabulary_size());
    const double kk = static_cast<double>(k);
    double elog_total = 0.0;
    for (Index i = 0; i < k; ++i) elog_total += dirichlet_expectation(next.lambda_.row(i).transpose()).sum();
    const double eta = next.eta_;
    const double grad = kk * v * (digamma(v * eta) - digamma(eta)) + elog_total;
    const double hess = kk * (v * v * trigamma(v * eta) - v * trigamma(eta));
    const double cand = eta - rho * grad / hess;
    if (cand > 0 && std::isfinite(cand)) next.eta_ = cand;
  }
  return next;
}

TopicModel fit_online(const TopicModel& model, const std::vector<textprep::CleanDoc>& batch) {
  return fit_online(model, project(batch, model.vocabulary()));
}

TopicModel train(const std::vector<textprep::CleanDoc>& docs, const OldaOptions& options, std::size_t passes,
                 std::size_t batch_size, std::size_t max_features) {
  if (docs.empty()) throw Error(ErrorCode::EmptyCorpus, "no documents to train on");
  if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
  OldaOptions opt = options;
  if (opt.corpus_size <= 0) opt.corpus_size = static_cast<double>(docs.size());
  TopicModel model(count_vocabulary(docs, max_features), opt);
  const auto bows = project(docs, model.vocabulary());
  for (std::size_t p = 0; p < passes; ++p) {
    for (std::size_t start = 0; start < bows.size(); start += batch_size) {
      auto end = std::min(bows.size(), start + batch_size);
      model = fit_online(model, std::vector<Bow>(bows.begin() + static_cast<std::ptrdiff_t>(start),
                                                 bows.begin() + static_cast<std::ptrdiff_t>(end)));
    }
  }
  return model;
}

TopicMembership infer(const TopicModel& model, const textprep::CleanDoc& doc, double eps_c, MembershipRule rule) {
  TopicMembership m;
  m.doc_id = doc.doc_id;
  const auto bow = to_bow(doc.tokens, model.vocabulary());
  const auto k = static_cast<Index>(model.k());
  if (bow.empty()) {
    // nothing the model knows: uniform theta, but no evidence for any topic
    m.theta = VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    return m;
  }
  auto post = e_step(model, bow);
  m.theta = post.gamma / post.gamma.sum();
  if (rule == MembershipRule::Posterior) {
    for (Index j = 0; j < k; ++j)
      if (m.theta[j] >= eps_c) m.members.insert(static_cast<std::size_t>(j));
    return m;
  }
  const MatrixXd tw = model.topic_word();
  double norm = 0.0;
  for (double c : bow.counts) norm += c * c;
  norm = std::sqrt(norm);
  for (Index j = 0; j < k; ++j) {
    double dot = 0.0;
    for (std::size_t i = 0; i < bow.ids.size(); ++i) dot += bow.counts[i] * tw(j, bow.ids[i]);
    if (dot / (norm * tw.row(j).norm()) >= eps_c) m.members.insert(static_cast<std::size_t>(j));
  }
  return m;
}

std::vector<TopicGraph> topic_graphs(const std::vector<socialgraph::SocialGraph>& graphs,
                                     const std::map<std::string, std::set<std::size_t>>& members, std::size_t k) {
  std::vector<TopicGraph> out;
  out.reserve(k);
  for (std::size_t t = 0; t < k; ++t) {
    std::vector<socialgraph::SocialGraph> parts;
    for (const auto& g : graphs) {
      std::set<socialgraph::NodeId> keep;
      for (const auto& [id, _] : g.nodes())
        if (auto it = members.find(id); it != members.end() && it->second.count(t)) keep.insert(id);
      if (!keep.empty()) parts.push_back(socialgraph::induced_subgraph(g, keep));
    }
    out.push_back({t, socialgraph::merge(parts)});
  }
  return out;
}

std::vector<TopicGraph> topic_graphs(const std::vector<socialgraph::SocialGraph>& graphs, const TopicModel& model,
                                     double eps_c, MembershipRule rule) {
  std::map<std::string, std::set<std::size_t>> members;
  for (const auto& g : graphs)
    for (const auto& [id, node] : g.nodes())
      members[id] = infer(model, textprep::CleanDoc{id, node.content}, eps_c, rule).members;
  return topic_graphs(graphs, members, model.k());
}

double perplexity(const TopicModel& model, const std::vector<Bow>& docs) {
  const MatrixXd tw = model.topic_word();
  const VectorXd& alpha = model.alpha();
  double bound = 0.0, tokens = 0.0;
  for (const auto& doc : docs) {
    check_ids(doc, model.vocabulary_size());
    if (doc.empty()) continue;
    const VectorXd gamma = e_step(model, doc).gamma;
    const VectorXd elog_theta = dirichlet_expectation(gamma);
    const VectorXd exp_elog_theta = elog_theta.array().exp();
    for (std::size_t i = 0; i < doc.ids.size(); ++i) bound += doc.counts[i] * std::log(tw.col(doc.ids[i]).dot(exp_elog_theta));
    bound += (alpha - gamma).dot(elog_theta) + lgamma_sum(gamma) - lgamma_sum(alpha) + std::lgamma(alpha.sum()) -
             std::lgamma(gamma.sum());
    tokens += doc.total();
  }
  if (tokens <= 0) throw Error(ErrorCode::EmptyCorpus, "no in-vocabulary tokens to score");
  return std::exp(-bound / tokens);
}

double perplexity(const TopicModel& model, const std::vector<textprep::CleanDoc>& docs) {
  return perplexity(model, project(docs, model.vocabulary()));
}

double log_perplexity(const TopicModel& model, const std::vector<textprep::CleanDoc>& docs) {
  return std::log(perplexity(model, docs));
}

void write_topic_report(std::ostream& out, const TopicModel& model, std::size_t top_n) {
  for (std::size_t j = 0; j < model.k(); ++j) {
    out << "# topic " << j << '\n';
    for (const auto& [w, p] : model.top_words(j, top_n)) out << w << '\t' << p << '\n';
  }
}

json to_json(const TopicModel& m) {
  json lambda = json::array();
  for (Index i = 0; i < m.lambda().rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.lambda().cols()));
    for (Index w = 0; w < m.lambda().cols(); ++w) row[static_cast<std::size_t>(w)] = m.lambda()(i, w);
    lambda.push_back(std::move(row));
  }
  std::vector<int> df;
  for (std::size_t i = 0; i < m.vocabulary().size(); ++i) df.push_back(m.vocabulary().df(i));
  const auto& o = m.options();
  return {{"version", 1},
          {"kind", "olda"},
          {"k", m.k()},
          {"terms", m.vocabulary().terms()},
          {"df", df},
          {"num_docs", m.vocabulary().num_docs()},
          {"alpha", std::vector<double>(m.alpha().data(), m.alpha().data() + m.alpha().size())},
          {"eta", m.eta()},
          {"update_count", m.update_count()},
          {"options",
           {{"tau0", o.tau0},
            {"kappa", o.kappa},
            {"estep_tolerance", o.estep_tolerance},
            {"estep_max_iterations", o.estep_max_iterations},
            {"auto_alpha", o.auto_alpha},
            {"auto_eta", o.auto_eta},
            {"corpus_size", o.corpus_size},
            {"seed", o.seed}}},
          {"lambda", lambda}};
}

TopicModel model_from_json(const json& j) {
  if (j.value("version", 0) != 1 || j.value("kind", "") != "olda")
    throw Error(ErrorCode::InvalidArgument, "not a topic model snapshot");
  textprep::Vocabulary vocab(j.at("terms").get<std::vector<std::string>>(), j.at("df").get<std::vector<int>>(),
                             j.at("num_docs").get<std::size_t>());
  const auto& rows = j.at("lambda");
  MatrixXd lambda(static_cast<Index>(rows.size()), static_cast<Index>(vocab.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto row = rows[i].get<std::vector<double>>();
    if (row.size() != vocab.size()) throw Error(ErrorCode::VocabularyMismatch, "lambda row length");
    for (std::size_t w = 0; w < row.size(); ++w) lambda(static_cast<Index>(i), static_cast<Index>(w)) = row[w];
  }
  auto a = j.at("alpha").get<std::vector<double>>();
  OldaOptions o;
  if (j.contains("options")) {
    const auto& oj = j["options"];
    o.tau0 = oj.value("tau0", o.tau0);
    o.kappa = oj.value("kappa", o.kappa);
    o.estep_tolerance = oj.value("estep_tolerance", o.estep_tolerance);
    o.estep_max_iterations = oj.value("estep_max_iterations", o.estep_max_iterations);
    o.auto_alpha = oj.value("auto_alpha", o.auto_alpha);
    o.auto_eta = oj.value("auto_eta", o.auto_eta);
    o.corpus_size = oj.value("corpus_size", o.corpus_size);
    o.seed = oj.value("seed", o.seed);
  }
  return TopicModel::from_lambda(std::move(vocab), std::move(lambda),
                                 Eigen::Map<VectorXd>(a.data(), static_cast<Index>(a.size())),
                                 j.at("eta").get<double>(), j.at("update_count").get<std::uint64_t>(), o);
}

}  // namespace contcomm::topics
