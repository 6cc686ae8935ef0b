#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "contcomm/common.hpp"
#include "contcomm/geo.hpp"

namespace contcomm::corpus {

enum class Veracity { Unchecked, Real, Fake };

std::string_view to_string(Veracity v);
Veracity veracity_from_string(std::string_view s);

struct TweetRecord {
  std::string id;
  std::string lang;
  Timestamp created_at{};
  std::string text;
  std::string user_id;
  bool is_retweet = false;
  std::optional<std::string> retweet_of;
  std::optional<std::string> reply_to;
  std::optional<LatLon> coords;
  std::optional<std::array<LatLon, 4>> place_bbox;
  Veracity veracity = Veracity::Unchecked;

  friend bool operator==(const TweetRecord&, const TweetRecord&) = default;
};

/// Parses one JSON-lines record; throws MalformedRecord on schema or range
/// violations. `is_retweet` is derived from `retweet_of`.
TweetRecord parse_record(std::string_view line);
TweetRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TweetRecord& r);
std::string to_json_line(const TweetRecord& r);

/// Lowercased tokens split on non-alphanumeric ASCII boundaries. Bytes >= 0x80
/// are kept inside tokens so non-Latin words survive.
std::vector<std::string> word_tokens(std::string_view text);

/// Lowercased `#tag` tokens (`#` followed by alphanumerics or `_`).
std::vector<std::string> hashtag_tokens(std::string_view text);

struct HazardDictionary {
  std::string hazard_name;
  std::set<std::string> keywords;
  std::set<std::string> hashtags;

  std::size_t size() const { return keywords.size() + hashtags.size(); }
};

/// Loads every `[hazard:<name>]` section and merges them into one dictionary
/// whose name joins the section names with '+'.
HazardDictionary load_dictionary(const std::filesystem::path& path);
/// Loads only the named section.
HazardDictionary load_dictionary(const std::filesystem::path& path, std::string_view hazard);
HazardDictionary parse_dictionary(std::string_view text);
std::vector<HazardDictionary> parse_dictionary_sections(std::string_view text);

bool matches(std::string_view text, const HazardDictionary& dict);
inline bool matches(const TweetRecord& rec, const HazardDictionary& dict) { return matches(rec.text, dict); }

struct StreamStats {
  std::size_t read = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t malformed = 0;
};

/// Pull-based record source. Implementations stand in for the social
/// network API; a live client would implement the same interface.
class TweetStream {
 public:
  virtual ~TweetStream() = default;
  virtual std::optional<TweetRecord> next() = 0;
  virtual const StreamStats& stats() const = 0;
};

class FileReplayStream final : public TweetStream {
 public:
  /// `rate` paces output in posts/second through `sleeper` (defaults to a
  /// real sleep). Throws SourceUnavailable if the file cannot be opened.
  explicit FileReplayStream(const std::filesystem::path& path, std::optional<double> rate = std::nullopt,
                            std::function<void(Millis)> sleeper = {});

  std::optional<TweetRecord> next() override;
  const StreamStats& stats() const override { return stats_; }

 private:
  std::ifstream in_;
  std::optional<double> rate_;
  std::function<void(Millis)> sleeper_;
  StreamStats stats_;
};

struct SyntheticTopic {
  std::string name;
  std::vector<std::string> words;
  std::vector<std::string> hashtags;
};

struct SyntheticCity {
  std::string name;
  double lat;
  double lon;
};

struct SyntheticConfig {
  std::uint64_t seed = 42;
  std::size_t count = 1000;
  Timestamp start = Timestamp{Millis{1630454400000}};  // 2021-09-01T00:00:00Z
  Millis mean_gap{2000};
  std::vector<SyntheticTopic> topics;
  std::vector<std::string> filler;
  // Long-tail chatter drawn with Zipf ranks; real streams are mostly this.
  std::vector<std::string> background;
  double p_background = 0.0;  // per word slot
  double background_zipf = 1.0;  // rank exponent
  std::vector<SyntheticCity> cities;
  double jitter_km = 8.0;
  double p_device = 0.45;
  double p_place = 0.2;
  double p_mention = 0.3;  // remainder: no location at all
  double p_retweet = 0.15;
  double p_reply = 0.1;
  double p_noise = 0.15;  // @mention / link / number decorations
  std::size_t min_words = 5;
  std::size_t max_words = 9;
};

/// Hydrological-hazard theme: three weather topics, US/world cities.
SyntheticConfig hydro_synthetic_config(std::uint64_t seed, std::size_t count);

/// `n` distinct pronounceable pseudo-words, the same for every call.
std::vector<std::string> pseudo_words(std::size_t n);

/// Deterministic generator: equal configs yield bit-identical sequences.
/// created_at is non-decreasing.
class SyntheticStream final : public TweetStream {
 public:
  explicit SyntheticStream(SyntheticConfig config);

  std::optional<TweetRecord> next() override;
  const StreamStats& stats() const override { return stats_; }

  /// Topic index that generated the last emitted record.
  std::size_t last_topic() const { return last_topic_; }

 private:
  std::string make_text(std::size_t topic, const SyntheticCity& city, bool mention_city);

  SyntheticConfig cfg_;
  std::mt19937_64 rng_;
  std::size_t emitted_ = 0;
  Timestamp clock_;
  std::size_t last_topic_ = 0;
  std::vector<std::pair<std::string, std::size_t>> recent_;  // id, topic
  std::vector<std::size_t> recent_city_;
  std::discrete_distribution<std::size_t> background_rank_;
  std::vector<std::string> recent_text_;
  StreamStats stats_;
};

struct FilterOptions {
  /// Empty means every language is accepted.
  std::set<std::string> languages;
  /// Keep non-matching retweets/replies whose parent was kept.
  bool keep_children_of_kept = true;
};

/// Wraps a source and yields only dictionary-matching records (plus
/// retweets/replies of kept records).
class FilteredStream final : public TweetStream {
 public:
  FilteredStream(std::unique_ptr<TweetStream> inner, std::shared_ptr<const HazardDictionary> dict,
                 FilterOptions options = {});

  std::optional<TweetRecord> next() override;
  const StreamStats& stats() const override { return stats_; }

 private:
  std::unique_ptr<TweetStream> inner_;
  std::shared_ptr<const HazardDictionary> dict_;
  FilterOptions options_;
  std::unordered_set<std::string> kept_;
  StreamStats stats_;
};

struct StreamSource {
  enum class Kind { FileReplay, Synthetic };
  Kind kind = Kind::FileReplay;
  std::filesystem::path path;
  std::optional<double> rate;
  SyntheticConfig synthetic;
};

std::unique_ptr<TweetStream> open_stream(const StreamSource& src, std::shared_ptr<const HazardDictionary> dict,
                                         FilterOptions options = {});

/// Drains a stream into memory.
std::vector<TweetRecord> collect(TweetStream& stream, std::size_t limit = SIZE_MAX);

}  // namespace contcomm::corpus
