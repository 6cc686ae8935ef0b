#include "contcomm/pipeline.hpp"

#include <algorithm>
#include <condition_variable>
#include <fstream>
#include <iostream>

namespace contcomm::gateway {

using nlohmann::json;
using socialgraph::SocialGraph;

namespace {

constexpr const char* kTweets = "tweets";
constexpr const char* kTopics = "topics";
constexpr const char* kWriterGroup = "topic-writer";

// Verdicts are stable per tweet for a given classifier, so each node is
// classified once while it stays in the window. Unchecked results are not
// remembered; the next batch tries again.
class CachedClassifier final : public veracity::Classifier {
 public:
  CachedClassifier(veracity::Classifier& inner, std::unordered_map<std::string, veracity::VeracityVerdict>& cache)
      : inner_(inner), cache_(cache) {}

  veracity::VeracityVerdict classify(const veracity::ContentRef& c) override {
    if (auto it = cache_.find(c.id); it != cache_.end()) return it->second;
    auto v = inner_.classify(c);
    v.doc_id = c.id;
    if (v.label != veracity::Veracity::Unchecked) {
      cache_.emplace(c.id, v);
      fresh.push_back(v);
    }
    return v;
  }

  std::vector<veracity::VeracityVerdict> fresh;

 private:
  veracity::Classifier& inner_;
  std::unordered_map<std::string, veracity::VeracityVerdict>& cache_;
};

json location_json(const GeoPoint& p) {
  json j{{"source", std::string(to_string(p.source))}};
  if (p.resolved()) {
    j["lat"] = p.lat;
    j["lon"] = p.lon;
  }
  return j;
}

std::string with_batch(std::uint64_t id, const std::string& what) {
  return "batch " + std::to_string(id) + ": " + what;
}

Timestamp newest_member(const communities::CommunityGraph& c) {
  Timestamp t{};
  for (const auto& [_, n] : c.graph.nodes()) t = std::max(t, n.created_at);
  return t;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<veracity::Classifier> classifier, const Clock& clock,
                   geoloc::Gazetteer gazetteer, textprep::StopWords stopwords)
    : config_((config.validate(), std::move(config))),
      classifier_(std::move(classifier)),
      clock_(clock),
      gazetteer_(std::move(gazetteer)),
      stopwords_(std::move(stopwords)),
      store_(relay::StoreOptions{config_.store_shards, config_.store_precision, config_.store_replicas}),
      broker_(
          relay::BrokerOptions{config_.k, 100000, Millis{30000},
                               config_.broker_log_dir.empty()
                                   ? std::nullopt
                                   : std::optional<std::filesystem::path>(config_.broker_log_dir),
                               false},
          clock_),
      topic_collection_(config_.k),
      hub_(config_.k, config_.subscriber_queue, config_.gray_pins),
      builder_(config_.relink_window) {
  if (!classifier_) throw Error(ErrorCode::InvalidArgument, "pipeline needs a veracity classifier");
}

Pipeline::~Pipeline() {
  wait_for_retrain();
  hub_.close_all();
}

BatchOutcome Pipeline::process(const std::vector<corpus::TweetRecord>& batch) {
  BatchOutcome out;
  if (batch.empty()) return out;
  out.batch_id = batches_.fetch_add(1) + 1;
  out.attempts = 1;
  std::lock_guard lock(state_mu_);
  try {
    if (fault_) fault_(out.batch_id, 1);
    attempt(batch, out);
  } catch (const Error& e) {
    // keep the code, drop the old "Code: " prefix so it is not doubled
    std::string what = e.what();
    const std::string prefix = std::string(to_string(e.code())) + ": ";
    if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
    throw Error(e.code(), with_batch(out.batch_id, what));
  }
  return out;
}

BatchOutcome Pipeline::run_batch(const std::vector<corpus::TweetRecord>& batch) {
  BatchOutcome out;
  if (batch.empty()) return out;  // nothing to do, nothing changes
  out.batch_id = batches_.fetch_add(1) + 1;
  std::lock_guard lock(state_mu_);
  // Failed attempts must not leave half a batch behind.
  const auto builder = builder_;
  const auto seen = seen_;
  const auto verdicts = verdicts_;
  const auto relayed = relayed_;
  for (out.attempts = 1; out.attempts <= 2; ++out.attempts) {
    try {
      if (fault_) fault_(out.batch_id, out.attempts);
      attempt(batch, out);
      out.error.clear();
      return out;
    } catch (const std::exception& e) {
      out.error = with_batch(out.batch_id, e.what());
      std::clog << "pipeline: " << out.error << (out.attempts == 1 ? ", retrying" : ", quarantined") << '\n';
      builder_ = builder;
      seen_ = seen;
      verdicts_ = verdicts;
      relayed_ = relayed;
      out.records = out.duplicates = out.fake_removed = 0;
    }
  }
  out.attempts = 2;
  out.quarantined = true;
  {
    std::lock_guard view(view_mu_);
    ++quarantined_;
  }
  dead_letter(out, batch);
  return out;
}

void Pipeline::attempt(const std::vector<corpus::TweetRecord>& batch, BatchOutcome& out) {
  const auto now = clock_.now();
  const auto cutoff = now - config_.window;

  // 1. resolve, clean, persist, link
  for (const auto& rec : batch) {
    if (rec.created_at < cutoff || seen_.count(rec.id)) {
      ++out.duplicates;
      continue;
    }
    auto tokens = textprep::preprocess(rec.text, stopwords_);
    const auto where = geoloc::resolve(rec, gazetteer_);
    auto doc = corpus::to_json(rec);
    doc["tokens"] = tokens;
    doc["location"] = location_json(where);
    doc["veracity"] = "unchecked";
    store_.put(kTweets, rec.id, std::move(doc), where);
    builder_.add(rec, std::move(tokens), where);
    seen_.emplace(rec.id, rec.created_at);
    ++out.records;
  }

  // 2. slide the window
  builder_.evict_before(cutoff);
  for (auto it = seen_.begin(); it != seen_.end();) {
    if (it->second < cutoff) {
      verdicts_.erase(it->first);
      relayed_.erase(it->first);
      it = seen_.erase(it);
    } else {
      ++it;
    }
  }
  const auto full = builder_.build();
  const auto parts = socialgraph::split_components(full);

  // 3. misinformation filter
  CachedClassifier cached(*classifier_, verdicts_);
  auto filtered = veracity::filter_graph(parts, cached);
  for (const auto& v : cached.fresh) {
    const auto& node = full.node(v.doc_id);
    auto doc = store_.get(kTweets, v.doc_id, node.location);
    doc["veracity"] = std::string(corpus::to_string(v.label));
    doc["veracity_score"] = v.score;
    store_.put(kTweets, v.doc_id, std::move(doc), node.location);
  }
  for (const auto& v : filtered.verdicts)
    if (v.label == veracity::Veracity::Fake) ++out.fake_removed;

  // 4. topics
  maybe_retrain(now);
  auto model = model_.snapshot();
  std::vector<communities::CommunityGraph> live;
  std::vector<PinEvent> events;
  if (model) {
    std::map<std::string, std::set<std::size_t>> members;
    for (const auto& g : filtered.graphs)
      for (const auto& [id, node] : g.nodes())
        members[id] = topics::infer(*model, textprep::CleanDoc{id, node.content}, config_.eps_c).members;
    relay_memberships(members, socialgraph::merge(filtered.graphs));

    // 5. places, then pins
    const auto fresh_after = now - config_.pin_retention;
    for (const auto& tg : topics::topic_graphs(filtered.graphs, members, model->k())) {
      auto found = communities::community_graphs(tg, config_.eps_l_km, config_.min_pts);
      std::erase_if(found, [&](const auto& c) { return newest_member(c) < fresh_after; });
      auto ev = pins_.apply(tg.topic, found);
      events.insert(events.end(), ev.begin(), ev.end());
      live.insert(live.end(), std::make_move_iterator(found.begin()), std::make_move_iterator(found.end()));
    }
  }
  auto expired = pins_.expire(now, config_.pin_retention);
  events.insert(events.end(), expired.begin(), expired.end());
  std::stable_sort(live.begin(), live.end(), [](const auto& a, const auto& b) {
    return a.topic != b.topic ? a.topic < b.topic : a.area_id < b.area_id;
  });

  {
    std::lock_guard view(view_mu_);
    live_ = live;
    fakes_ += out.fake_removed;
    last_batch_at_ = now;
  }
  hub_.publish(events);
  out.communities = std::move(live);
  out.events = std::move(events);
}

void Pipeline::relay_memberships(const std::map<std::string, std::set<std::size_t>>& members,
                                 const SocialGraph& clean) {
  std::size_t published = 0;
  for (const auto& [id, topics] : members) {
    auto& done = relayed_[id];
    for (auto t : topics) {
      if (done.count(t)) continue;
      relay::Envelope e;
      e.tweet_id = id;
      e.topic = t;
      e.location = clean.node(id).location;
      broker_.publish(std::move(e));
      ++published;
    }
  }
  if (published == 0) return;
  // The writer consumes right away; delivery is at least once and both
  // sinks ignore repeats, so a crash between append and ack is harmless.
  for (std::size_t t = 0; t < broker_.topic_count(); ++t) {
    auto member = broker_.join(kWriterGroup, t);
    while (auto env = broker_.poll(member)) {
      topic_collection_.append(env->topic, env->tweet_id, env->location);
      json item{{"tweet_id", env->tweet_id}, {"location", location_json(env->location)}};
      store_.append_unique(kTopics, "topic-" + std::to_string(env->topic), "tweets", std::move(item), env->tweet_id,
                           GeoPoint::unresolved());
      relayed_[env->tweet_id].insert(env->topic);
      broker_.ack(member, env->offset);
    }
    broker_.leave(member);
  }
}

std::vector<textprep::CleanDoc> Pipeline::training_docs() const {
  // Every kept tweet stays in the collection for retraining, fakes excepted.
  std::vector<textprep::CleanDoc> docs;
  store_.for_each(kTweets, [&](const std::string& key, const relay::Document& d) {
    if (d.value("veracity", "") == "fake") return;
    auto tokens = d.value("tokens", std::vector<std::string>{});
    if (!tokens.empty()) docs.push_back({key, std::move(tokens)});
  });
  std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
  return docs;
}

std::shared_ptr<topics::TopicModel> Pipeline::fit(const std::vector<textprep::CleanDoc>& docs) const {
  topics::OldaOptions opt;
  opt.k = config_.k;
  opt.seed = config_.topic_seed;
  return std::make_shared<topics::TopicModel>(
      topics::train(docs, opt, config_.olda_passes, config_.olda_batch, config_.max_features));
}

void Pipeline::maybe_retrain(Timestamp now) {
  if (trained_once_ && now - last_trained_ < config_.retrain_interval) return;
  auto docs = training_docs();
  if (docs.size() < config_.min_train_docs) return;
  if (!trained_once_ || !config_.retrain_in_background) {
    model_.swap(fit(docs));
  } else {
    std::unique_lock guard(retrain_mu_, std::try_to_lock);
    if (!guard) return;
    if (retrain_thread_.joinable()) retrain_thread_.join();
    retrain_thread_ = std::jthread([this, docs = std::move(docs)] {
      try {
        model_.swap(fit(docs));
      } catch (const std::exception& e) {
        std::clog << "pipeline: background retrain failed: " << e.what() << '\n';
      }
    });
  }
  trained_once_ = true;
  last_trained_ = now;
}

bool Pipeline::retrain() {
  std::vector<textprep::CleanDoc> docs;
  {
    std::lock_guard lock(state_mu_);
    docs = training_docs();
  }
  if (docs.size() < std::max<std::size_t>(config_.min_train_docs, 1)) return false;
  model_.swap(fit(docs));
  std::lock_guard lock(state_mu_);
  trained_once_ = true;
  last_trained_ = clock_.now();
  return true;
}

void Pipeline::set_model(std::shared_ptr<const topics::TopicModel> model) {
  if (model && model->k() != config_.k)
    throw Error(ErrorCode::InvalidArgument, "model has " + std::to_string(model->k()) + " topics, config wants " +
                                                std::to_string(config_.k));
  model_.swap(std::move(model));
  std::lock_guard lock(state_mu_);
  trained_once_ = true;
  last_trained_ = clock_.now();
}

void Pipeline::wait_for_retrain() {
  std::lock_guard guard(retrain_mu_);
  if (retrain_thread_.joinable()) retrain_thread_.join();
}

std::vector<PinEvent> Pipeline::expire_pins() {
  auto events = pins_.expire(clock_.now(), config_.pin_retention);
  if (!events.empty()) {
    const auto fresh_after = clock_.now() - config_.pin_retention;
    std::lock_guard view(view_mu_);
    std::erase_if(live_, [&](const auto& c) { return newest_member(c) < fresh_after; });
  }
  hub_.publish(events);
  return events;
}

void Pipeline::dead_letter(const BatchOutcome& out, const std::vector<corpus::TweetRecord>& batch) {
  json records = json::array();
  for (const auto& r : batch) records.push_back(corpus::to_json(r));
  std::ofstream f(config_.dead_letter, std::ios::app);
  if (!f) {
    std::clog << "pipeline: cannot open dead-letter file " << config_.dead_letter << '\n';
    return;
  }
  f << json{{"batch_id", out.batch_id}, {"error", out.error}, {"records", std::move(records)}}.dump() << '\n';
}

std::vector<communities::CommunityGraph> Pipeline::communities() const {
  std::lock_guard view(view_mu_);
  return live_;
}

json Pipeline::community_report() const { return communities::community_report(communities()); }

json Pipeline::topics_report(std::size_t top_n) const {
  json out = json::array();
  auto model = model_.snapshot();
  if (!model) return out;
  for (std::size_t j = 0; j < model->k(); ++j) {
    json words = json::array();
    for (const auto& [w, p] : model->top_words(j, top_n)) words.push_back({{"word", w}, {"weight", p}});
    out.push_back({{"topic", j}, {"words", std::move(words)}});
  }
  return out;
}

std::size_t Pipeline::working_nodes() const {
  std::lock_guard lock(state_mu_);
  return builder_.node_count();
}

json Pipeline::health() const {
  auto model = model_.snapshot();
  json j{{"batches", batches()}, {"pins", pins_.size()}, {"subscribers", hub_.subscriptions().size()}};
  {
    std::lock_guard view(view_mu_);
    j["communities"] = live_.size();
    j["fake_removed"] = fakes_;
    j["quarantined"] = quarantined_;
    j["last_batch_at"] = last_batch_at_ == Timestamp{} ? json(nullptr) : json(format_iso8601(last_batch_at_));
  }
  if (model)
    j["model"] = {{"k", model->k()}, {"vocabulary", model->vocabulary_size()}, {"updates", model->update_count()}};
  else
    j["model"] = nullptr;
  return j;
}

// ---------------------------------------------------------------------------

StreamRunner::StreamRunner(Pipeline& pipeline, Opener open) : pipeline_(pipeline), open_(std::move(open)) {}

StreamRunner::~StreamRunner() { stop(); }

std::vector<BatchOutcome> StreamRunner::replay(SimulatedClock* clock) {
  const auto& cfg = pipeline_.config();
  auto stream = open_();
  std::vector<BatchOutcome> outcomes;
  std::vector<corpus::TweetRecord> batch;
  auto run = [&] {
    if (batch.empty()) return;
    if (clock) {
      Timestamp newest{};
      for (const auto& r : batch) newest = std::max(newest, r.created_at);
      if (newest > clock->now()) clock->set(newest);
    }
    outcomes.push_back(pipeline_.run_batch(batch));
    batch.clear();
  };
  while (auto rec = stream->next()) {
    ++progress_;
    if (!batch.empty() && (cfg.batch_interval == Millis{0} || batch.size() >= cfg.max_batch ||
                           rec->created_at - batch.front().created_at > cfg.batch_interval))
      run();
    batch.push_back(std::move(*rec));
  }
  run();
  return outcomes;
}

namespace {

void nap(std::stop_token st, Millis d) {
  std::mutex m;
  std::condition_variable_any cv;
  std::unique_lock lock(m);
  cv.wait_for(lock, st, d, [] { return false; });
}

}  // namespace

void StreamRunner::start() {
  if (reader_.joinable()) return;
  reader_ = std::jthread([this](std::stop_token st) { reader_loop(st); });
  batcher_ = std::jthread([this](std::stop_token st) { batch_loop(st); });
}

void StreamRunner::stop() {
  if (!reader_.joinable()) return;
  reader_.request_stop();
  batcher_.request_stop();
  reader_.join();
  batcher_.join();
  flush();
}

void StreamRunner::reader_loop(std::stop_token st) {
  std::unique_ptr<corpus::TweetStream> stream;
  while (!st.stop_requested()) {
    try {
      if (!stream || reopen_requested_.exchange(false)) {
        if (stream) ++reopens_;
        stream = open_();
      }
      if (auto rec = stream->next()) {
        ++progress_;
        std::lock_guard lock(buffer_mu_);
        buffer_.push_back(std::move(*rec));
        continue;
      }
    } catch (const std::exception& e) {
      std::clog << "runner: source error: " << e.what() << '\n';
      stream.reset();
    }
    nap(st, Millis{50});  // source idle; liveness decides when to reopen
  }
}

void StreamRunner::flush() {
  std::vector<corpus::TweetRecord> batch;
  {
    std::lock_guard lock(buffer_mu_);
    batch.swap(buffer_);
  }
  for (std::size_t i = 0; i < batch.size(); i += pipeline_.config().max_batch) {
    const auto end = std::min(batch.size(), i + pipeline_.config().max_batch);
    pipeline_.run_batch({batch.begin() + static_cast<std::ptrdiff_t>(i), batch.begin() + static_cast<std::ptrdiff_t>(end)});
  }
  pipeline_.expire_pins();
}

void StreamRunner::batch_loop(std::stop_token st) {
  const auto tick = std::max(pipeline_.config().batch_interval, Millis{10});
  while (!st.stop_requested()) {
    nap(st, tick);
    flush();
  }
}

}  // namespace contcomm::gateway
