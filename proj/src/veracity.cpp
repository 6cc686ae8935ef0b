#include "contcomm/veracity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include <httplib.h>

namespace contcomm::veracity {

using nlohmann::json;

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

std::string fingerprint(const std::vector<LabeledDoc>& docs) {
  std::uint64_t h = fnv1a64("");
  for (const auto& d : docs) {
    h = fnv1a64(d.fake ? "F" : "R", h);
    for (const auto& t : d.doc.tokens) h = fnv1a64(t + " ", h);
    h = fnv1a64("\n", h);
  }
  return hex64(h);
}

}  // namespace

std::vector<LabeledDoc> load_labeled_tsv(const std::filesystem::path& path, const textprep::StopWords& stop) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open labeled dataset " + path.string());
  std::vector<LabeledDoc> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorCode::MalformedRecord, path.string() + ":" + std::to_string(lineno) + ": missing tab");
    std::string label = to_lower_ascii(line.substr(0, tab));
    if (label != "fake" && label != "real")
      throw Error(ErrorCode::MalformedRecord, path.string() + ":" + std::to_string(lineno) + ": bad label");
    out.push_back({textprep::make_clean_doc(std::to_string(lineno), line.substr(tab + 1), stop), label == "fake"});
  }
  return out;
}

double LinearFakeNewsModel::score(const textprep::SparseVector& x) const {
  double z = bias;
  for (textprep::SparseVector::InnerIterator it(x); it; ++it) z += weights[it.index()] * it.value();
  return sigmoid(z);
}

namespace {

void check_compatible(const LinearFakeNewsModel& m) {
  if (static_cast<std::size_t>(m.weights.size()) != m.vocabulary.size())
    throw Error(ErrorCode::VocabularyMismatch, "model has " + std::to_string(m.weights.size()) +
                                                   " weights for a vocabulary of " +
                                                   std::to_string(m.vocabulary.size()));
}

}  // namespace

Evaluation evaluate(const LinearFakeNewsModel& model, const std::vector<LabeledDoc>& docs) {
  check_compatible(model);
  Evaluation e;
  e.n = docs.size();
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (const auto& d : docs) {
    bool predicted = label_for(model.score(textprep::vectorize(d.doc, model.vocabulary))) == Veracity::Fake;
    if (predicted == d.fake) ++correct;
    if (predicted && d.fake) ++tp;
    if (predicted && !d.fake) ++fp;
    if (!predicted && d.fake) ++fn;
  }
  if (e.n) e.accuracy = static_cast<double>(correct) / static_cast<double>(e.n);
  e.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  e.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  e.f1 = e.precision + e.recall > 0 ? 2 * e.precision * e.recall / (e.precision + e.recall) : 0.0;
  return e;
}

TrainResult train_linear(const std::vector<LabeledDoc>& train, const std::vector<LabeledDoc>& test,
                         const TrainOptions& opt) {
  if (train.empty()) throw Error(ErrorCode::EmptyCorpus, "no training documents");
  bool any_fake = std::any_of(train.begin(), train.end(), [](const LabeledDoc& d) { return d.fake; });
  bool any_real = std::any_of(train.begin(), train.end(), [](const LabeledDoc& d) { return !d.fake; });
  if (!any_fake || !any_real) throw Error(ErrorCode::SingleClassCorpus, "training data holds a single class");

  std::vector<textprep::CleanDoc> docs;
  docs.reserve(train.size());
  for (const auto& d : train) docs.push_back(d.doc);
  auto [vocab, matrix] = textprep::build_matrix(docs, {opt.max_features});

  const auto n = static_cast<std::size_t>(matrix.weights.rows());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab.size()));
  double scale = 1.0;  // effective weights are scale * w
  double b = 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opt.seed);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = opt.learning_rate / (1.0 + static_cast<double>(epoch));
    for (std::size_t i : order) {
      const auto row = static_cast<Eigen::Index>(i);
      double z = b;
      for (textprep::SparseMatrix::InnerIterator it(matrix.weights, row); it; ++it)
        z += scale * w[it.col()] * it.value();
      const double g = sigmoid(z) - (train[i].fake ? 1.0 : 0.0);
      scale *= 1.0 - lr * opt.l2;
      for (textprep::SparseMatrix::InnerIterator it(matrix.weights, row); it; ++it)
        w[it.col()] -= lr * g * it.value() / scale;
      b -= lr * g;
      if (scale < 1e-9) {
        w *= scale;
        scale = 1.0;
      }
    }
  }

  TrainResult result;
  result.model.vocabulary = std::move(vocab);
  result.model.weights = w * scale;
  result.model.bias = b;
  result.model.trained_on = fingerprint(train);
  result.train_size = train.size();
  result.test_size = test.size();
  if (!test.empty()) result.test = evaluate(result.model, test);
  return result;
}

TrainResult train_linear(const std::vector<LabeledDoc>& docs, const TrainOptions& opt) {
  if (docs.empty()) throw Error(ErrorCode::EmptyCorpus, "no labeled documents");
  if (!(opt.train_fraction > 0.0 && opt.train_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "train fraction must lie in (0,1)");
  std::vector<std::size_t> fake, real;
  for (std::size_t i = 0; i < docs.size(); ++i) (docs[i].fake ? fake : real).push_back(i);
  if (fake.empty() || real.empty()) throw Error(ErrorCode::SingleClassCorpus, "dataset holds a single class");

  std::mt19937_64 rng(opt.seed);
  std::vector<LabeledDoc> train, test;
  for (auto* cls : {&fake, &real}) {
    std::shuffle(cls->begin(), cls->end(), rng);
    auto cut = static_cast<std::size_t>(std::llround(opt.train_fraction * static_cast<double>(cls->size())));
    cut = std::clamp<std::size_t>(cut, 1, cls->size());
    for (std::size_t k = 0; k < cls->size(); ++k) (k < cut ? train : test).push_back(docs[(*cls)[k]]);
  }
  return train_linear(train, test, opt);
}

VeracityVerdict classify(const textprep::CleanDoc& doc, const LinearFakeNewsModel& model) {
  check_compatible(model);
  double s = model.score(textprep::vectorize(doc, model.vocabulary));
  return {doc.doc_id, label_for(s), s};
}

VeracityVerdict LinearClassifier::classify(const ContentRef& content) {
  auto model = snapshot();
  return veracity::classify(textprep::CleanDoc{content.id, content.tokens}, *model);
}

void LinearClassifier::swap(std::shared_ptr<const LinearFakeNewsModel> next) {
  std::lock_guard lock(mu_);
  model_ = std::move(next);
}

std::shared_ptr<const LinearFakeNewsModel> LinearClassifier::snapshot() const {
  std::lock_guard lock(mu_);
  return model_;
}

namespace {

struct Endpoint {
  std::string origin;  // scheme://host:port
  std::string path;
};

Endpoint split_url(const std::string& url) {
  auto scheme = url.find("://");
  auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

VeracityVerdict fallback(const std::string& id, const RemoteClassifierSpec& spec, std::string_view why) {
  std::clog << "[veracity] remote classifier incident for " << id << ": " << why << '\n';
  if (spec.fallback == Fallback::PassThrough) return {id, Veracity::Real, 0.0};
  return {id, Veracity::Unchecked, 0.0};
}

}  // namespace

VeracityVerdict classify_remote(const std::string& id, const std::string& text, const RemoteClassifierSpec& spec,
                                RemoteStats* stats) {
  if (spec.timeout <= Millis::zero()) throw Error(ErrorCode::InvalidArgument, "remote timeout must be positive");
  if (stats) ++stats->calls;
  auto ep = split_url(spec.endpoint);
  httplib::Client client(ep.origin);
  auto secs = spec.timeout.count() / 1000;
  auto usecs = (spec.timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  const std::string body = json{{"id", id}, {"text", text}}.dump();
  auto res = client.Post(ep.path, body, "application/json");
  if (!res) {
    auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      if (stats) ++stats->timeouts;
      return fallback(id, spec, "timeout");
    }
    if (stats) ++stats->unreachable;
    return fallback(id, spec, "unreachable: " + httplib::to_string(err));
  }
  if (res->status != 200) {
    if (stats) ++stats->bad_responses;
    return fallback(id, spec, "HTTP " + std::to_string(res->status));
  }
  json j = json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("score") || !j["score"].is_number()) {
    if (stats) ++stats->bad_responses;
    return fallback(id, spec, "malformed body");
  }
  double s = j["score"].get<double>();
  if (!(s >= 0.0 && s <= 1.0)) {
    if (stats) ++stats->bad_responses;
    return fallback(id, spec, "score out of range");
  }
  return {id, label_for(s), s};
}

FilterResult filter_graph(const std::vector<socialgraph::SocialGraph>& graphs, Classifier& classifier,
                          const std::function<void(const VeracityVerdict&)>& on_verdict) {
  FilterResult out;
  out.graphs.reserve(graphs.size());
  for (const auto& g : graphs) {
    std::set<socialgraph::NodeId> doomed;
    for (const auto& [id, node] : g.nodes()) {
      auto v = classifier.classify({id, node.content, node.text});
      v.doc_id = id;
      if (v.label == Veracity::Fake) doomed.insert(id);
      if (on_verdict) on_verdict(v);
      out.verdicts.push_back(std::move(v));
    }
    out.removed.insert(doomed.begin(), doomed.end());
    out.graphs.push_back(socialgraph::remove_nodes(g, doomed));
  }
  return out;
}

json to_json(const LinearFakeNewsModel& m) {
  json terms = json::array(), df = json::array(), w = json::array();
  for (std::size_t i = 0; i < m.vocabulary.size(); ++i) {
    terms.push_back(m.vocabulary.term(i));
    df.push_back(m.vocabulary.df(i));
    w.push_back(m.weights[static_cast<Eigen::Index>(i)]);
  }
  return {{"version", 1},        {"kind", "linear_tfidf"}, {"num_docs", m.vocabulary.num_docs()},
          {"terms", terms},      {"df", df},               {"weights", w},
          {"bias", m.bias},      {"trained_on", m.trained_on}};
}

LinearFakeNewsModel model_from_json(const json& j) {
  LinearFakeNewsModel m;
  m.vocabulary = textprep::Vocabulary(j.at("terms").get<std::vector<std::string>>(), j.at("df").get<std::vector<int>>(),
                                      j.at("num_docs").get<std::size_t>());
  auto w = j.at("weights").get<std::vector<double>>();
  m.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  m.bias = j.at("bias").get<double>();
  m.trained_on = j.value("trained_on", "");
  check_compatible(m);
  return m;
}

}  // namespace contcomm::veracity
