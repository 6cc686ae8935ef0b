#include <cmath>
#include <cstdio>

#include "contcomm/corpus.hpp"

namespace contcomm::corpus {

SyntheticConfig hydro_synthetic_config(std::uint64_t seed, std::size_t count) {
  SyntheticConfig cfg;
  cfg.seed = seed;
  cfg.count = count;
  cfg.topics = {
      {"weather",
       {"rain", "wind", "temp", "humidity", "weather", "heavy", "forecast", "rainfall", "cloudy", "degrees",
        "precipitation", "cold", "morning", "disaster"},
       {"#rain", "#weather", "#rainfall"}},
      {"rescue",
       {"hurricane", "water", "overflow", "help", "authority", "rescue", "flood", "people", "evacuation", "shelter",
        "damage", "emergency", "relief", "river"},
       {"#hurricane", "#flood", "#floods"}},
      {"warning",
       {"thunderstorm", "severe", "warning", "storm", "tornado", "county", "watch", "issued", "alert", "hail",
        "lightning", "gusts", "service", "national"},
       {"#storm", "#tornado", "#thunderstorm"}},
  };
  cfg.filler = {"today", "now", "please", "everyone", "stay", "safe", "city", "news", "update", "again", "really",
                "night", "just", "still"};
  cfg.background = pseudo_words(60000);
  cfg.p_background = 0.75;
  cfg.background_zipf = 0.5;
  cfg.cities = {
      {"Houston", 29.7604, -95.3698},   {"New Orleans", 29.9511, -90.0715}, {"Miami", 25.7617, -80.1918},
      {"New York City", 40.7128, -74.0060}, {"Mumbai", 19.0760, 72.8777},  {"Manila", 14.5995, 120.9842},
      {"Jakarta", -6.2088, 106.8456},   {"London", 51.5074, -0.1278},
  };
  return cfg;
}

std::vector<std::string> pseudo_words(std::size_t n) {
  static constexpr std::string_view cons = "bdfgklmnprstvz";
  static constexpr std::string_view vow = "aeiou";
  const std::size_t syl = cons.size() * vow.size();
  if (n > syl * syl * cons.size()) throw Error(ErrorCode::InvalidArgument, "too many pseudo-words");
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // consonant-vowel, consonant-vowel, consonant: stable under stemming
    std::size_t a = i % syl, b = (i / syl) % syl, c = i / (syl * syl);
    std::string w;
    w += cons[a % cons.size()];
    w += vow[a / cons.size()];
    w += cons[b % cons.size()];
    w += vow[b / cons.size()];
    w += cons[c];
    out.push_back(std::move(w));
  }
  return out;
}

SyntheticStream::SyntheticStream(SyntheticConfig config)
    : cfg_(std::move(config)), rng_(cfg_.seed), clock_(cfg_.start) {
  if (!cfg_.background.empty()) {
    std::vector<double> w(cfg_.background.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::pow(static_cast<double>(i + 1), -cfg_.background_zipf);
    background_rank_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }
  if (cfg_.topics.empty() || cfg_.cities.empty())
    throw Error(ErrorCode::SourceUnavailable, "synthetic source needs topics and cities");
  for (const auto& t : cfg_.topics)
    if (t.words.empty()) throw Error(ErrorCode::SourceUnavailable, "synthetic topic '" + t.name + "' has no words");
}

namespace {

// Zipf-like rank weights so each topic has a few dominant words.
std::size_t zipf_pick(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / static_cast<double>(i + 1);
  std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
  return dist(rng);
}

}  // namespace

std::string SyntheticStream::make_text(std::size_t topic, const SyntheticCity& city, bool mention_city) {
  const auto& t = cfg_.topics[topic];
  std::uniform_int_distribution<std::size_t> len(cfg_.min_words, std::max(cfg_.min_words, cfg_.max_words));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t n = len(rng_);
  std::string text;
  auto append = [&](const std::string& w) {
    if (!text.empty()) text += ' ';
    text += w;
  };
  if (u(rng_) < cfg_.p_noise) append("@user" + std::to_string(rng_() % 900 + 100));
  // The topic's first word is always present so every post matches the
  // hazard dictionary.
  std::size_t anchor_at = rng_() % n;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == anchor_at) {
      append(t.words[0]);
    } else if (!cfg_.background.empty() && u(rng_) < cfg_.p_background) {
      append(cfg_.background[background_rank_(rng_)]);
    } else if (!cfg_.filler.empty() && u(rng_) < 0.2) {
      append(cfg_.filler[rng_() % cfg_.filler.size()]);
    } else {
      append(t.words[zipf_pick(rng_, t.words.size())]);
    }
  }
  if (mention_city) append("in " + city.name);
  if (!t.hashtags.empty() && u(rng_) < 0.4) append(t.hashtags[rng_() % t.hashtags.size()]);
  if (u(rng_) < cfg_.p_noise) append("http://t.co/" + std::to_string(rng_() % 100000));
  if (u(rng_) < cfg_.p_noise) append(std::to_string(rng_() % 500));
  return text;
}

std::optional<TweetRecord> SyntheticStream::next() {
  if (emitted_ >= cfg_.count) return std::nullopt;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::exponential_distribution<double> gap(1.0 / static_cast<double>(std::max<std::int64_t>(1, cfg_.mean_gap.count())));

  clock_ += Millis{static_cast<std::int64_t>(gap(rng_))};

  TweetRecord r;
  char idbuf[32];
  std::snprintf(idbuf, sizeof idbuf, "s%llu-%06zu", static_cast<unsigned long long>(cfg_.seed), emitted_);
  r.id = idbuf;
  r.lang = "en";
  r.created_at = clock_;
  r.user_id = "u" + std::to_string(rng_() % 5000);

  double kind = recent_.empty() ? 1.0 : u(rng_);
  std::size_t topic;
  std::size_t city_idx;
  if (kind < cfg_.p_retweet + cfg_.p_reply) {
    std::size_t parent = recent_.size() - 1 - (rng_() % std::min<std::size_t>(recent_.size(), 20));
    topic = recent_[parent].second;
    city_idx = recent_city_[parent];
    if (kind < cfg_.p_retweet) {
      r.retweet_of = recent_[parent].first;
      r.is_retweet = true;
      r.text = "RT @" + std::string("user") + std::to_string(rng_() % 900 + 100) + ": " + recent_text_[parent];
    } else {
      r.reply_to = recent_[parent].first;
    }
  } else {
    topic = rng_() % cfg_.topics.size();
    city_idx = rng_() % cfg_.cities.size();
  }
  const auto& city = cfg_.cities[city_idx];

  double loc_draw = u(rng_);
  bool mention = false;
  auto jittered = [&] {
    double dlat = gauss(rng_) * cfg_.jitter_km / 111.19;
    double dlon = gauss(rng_) * cfg_.jitter_km / (111.19 * std::max(0.2, std::cos(deg2rad(city.lat))));
    return LatLon{std::clamp(city.lat + dlat, -90.0, 90.0), std::clamp(city.lon + dlon, -180.0, 180.0)};
  };
  if (loc_draw < cfg_.p_device) {
    r.coords = jittered();
  } else if (loc_draw < cfg_.p_device + cfg_.p_place) {
    LatLon c = jittered();
    const double h = 0.05;
    r.place_bbox = std::array<LatLon, 4>{LatLon{c.lat - h, c.lon - h}, LatLon{c.lat - h, c.lon + h},
                                         LatLon{c.lat + h, c.lon + h}, LatLon{c.lat + h, c.lon - h}};
  } else if (loc_draw < cfg_.p_device + cfg_.p_place + cfg_.p_mention) {
    mention = true;
  }
  if (!r.retweet_of) r.text = make_text(topic, city, mention);

  last_topic_ = topic;
  recent_.emplace_back(r.id, topic);
  recent_city_.push_back(city_idx);
  recent_text_.push_back(r.text);
  if (recent_.size() > 64) {
    recent_.erase(recent_.begin());
    recent_city_.erase(recent_city_.begin());
    recent_text_.erase(recent_text_.begin());
  }
  ++emitted_;
  ++stats_.read;
  ++stats_.accepted;
  return r;
}

}  // namespace contcomm::corpus
