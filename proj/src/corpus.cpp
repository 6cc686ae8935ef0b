#include "contcomm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <thread>

namespace contcomm::corpus {

using nlohmann::json;

std::string_view to_string(Veracity v) {
  switch (v) {
    case Veracity::Unchecked: return "unchecked";
    case Veracity::Real: return "real";
    case Veracity::Fake: return "fake";
  }
  return "unchecked";
}

Veracity veracity_from_string(std::string_view s) {
  if (s == "real") return Veracity::Real;
  if (s == "fake") return Veracity::Fake;
  if (s == "unchecked") return Veracity::Unchecked;
  throw Error(ErrorCode::MalformedRecord, "unknown veracity '" + std::string(s) + "'");
}

namespace {

std::optional<std::string> optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(ErrorCode::MalformedRecord, std::string(key) + " must be a string or null");
  return it->get<std::string>();
}

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string())
    throw Error(ErrorCode::MalformedRecord, std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

std::optional<double> optional_number(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw Error(ErrorCode::MalformedRecord, std::string(key) + " must be a number or null");
  return it->get<double>();
}

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

TweetRecord record_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::MalformedRecord, "record is not a JSON object");
  TweetRecord r;
  r.id = required_string(j, "id");
  if (r.id.empty()) throw Error(ErrorCode::MalformedRecord, "empty id");
  r.lang = j.contains("lang") && j["lang"].is_string() ? j["lang"].get<std::string>() : std::string{};
  r.created_at = parse_iso8601(required_string(j, "created_at"));
  r.text = required_string(j, "text");
  r.user_id = j.contains("user_id") && j["user_id"].is_string() ? j["user_id"].get<std::string>() : std::string{};
  r.retweet_of = optional_string(j, "retweet_of");
  r.reply_to = optional_string(j, "reply_to");
  r.is_retweet = r.retweet_of.has_value();

  auto lat = optional_number(j, "lat");
  auto lon = optional_number(j, "lon");
  if (lat.has_value() != lon.has_value()) throw Error(ErrorCode::MalformedRecord, "lat/lon must be given together");
  if (lat) {
    if (!valid_latlon(*lat, *lon)) throw Error(ErrorCode::MalformedRecord, "coordinates out of range");
    r.coords = LatLon{*lat, *lon};
  }

  if (auto it = j.find("place_bbox"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 4) throw Error(ErrorCode::MalformedRecord, "place_bbox needs 4 pairs");
    std::array<LatLon, 4> box;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& p = (*it)[i];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
        throw Error(ErrorCode::MalformedRecord, "place_bbox entries must be [lat,lon]");
      box[i] = {p[0].get<double>(), p[1].get<double>()};
      if (!valid_latlon(box[i].lat, box[i].lon)) throw Error(ErrorCode::MalformedRecord, "place_bbox out of range");
    }
    r.place_bbox = box;
  }
  if (auto it = j.find("veracity"); it != j.end() && it->is_string())
    r.veracity = veracity_from_string(it->get<std::string>());
  return r;
}

TweetRecord parse_record(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::MalformedRecord, "invalid JSON");
  return record_from_json(j);
}

json to_json(const TweetRecord& r) {
  json j;
  j["id"] = r.id;
  j["lang"] = r.lang;
  j["created_at"] = format_iso8601(r.created_at);
  j["text"] = r.text;
  j["user_id"] = r.user_id;
  j["retweet_of"] = r.retweet_of ? json(*r.retweet_of) : json(nullptr);
  j["reply_to"] = r.reply_to ? json(*r.reply_to) : json(nullptr);
  j["lat"] = r.coords ? json(r.coords->lat) : json(nullptr);
  j["lon"] = r.coords ? json(r.coords->lon) : json(nullptr);
  if (r.place_bbox) {
    json box = json::array();
    for (const auto& p : *r.place_bbox) box.push_back({p.lat, p.lon});
    j["place_bbox"] = box;
  } else {
    j["place_bbox"] = nullptr;
  }
  if (r.veracity != Veracity::Unchecked) j["veracity"] = to_string(r.veracity);
  return j;
}

std::string to_json_line(const TweetRecord& r) { return to_json(r).dump(); }

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> hashtag_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '#') continue;
    std::size_t j = i + 1;
    while (j < text.size() && (is_word_byte(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
    if (j > i + 1) out.push_back(to_lower_ascii(text.substr(i, j - i)));
    i = j - 1;
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<HazardDictionary> parse_dictionary_sections(std::string_view text) {
  std::vector<HazardDictionary> sections;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  auto malformed = [&](const std::string& why) {
    return Error(ErrorCode::MalformedDictionary, "line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.rfind("[hazard:", 0) != 0) throw malformed("expected [hazard:<name>]");
      std::string name = trim(std::string_view(line).substr(8, line.size() - 9));
      if (name.empty()) throw malformed("empty hazard name");
      sections.push_back({to_lower_ascii(name), {}, {}});
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw malformed("expected key=value");
    if (sections.empty()) throw malformed("entry before any [hazard:...] section");
    std::string key = to_lower_ascii(trim(std::string_view(line).substr(0, eq)));
    std::string values = line.substr(eq + 1);
    bool hashtags = key == "hashtags";
    if (!hashtags && key != "keywords") throw malformed("unknown key '" + key + "'");
    std::istringstream items(values);
    std::string item;
    while (std::getline(items, item, ',')) {
      std::string term = to_lower_ascii(trim(item));
      if (term.empty()) continue;
      if (hashtags) {
        if (term[0] != '#' || term.size() < 2) throw malformed("hashtag '" + term + "' must start with '#'");
        sections.back().hashtags.insert(term);
      } else {
        if (word_tokens(term).empty()) throw malformed("keyword '" + term + "' has no word characters");
        sections.back().keywords.insert(term);
      }
    }
  }
  return sections;
}

HazardDictionary parse_dictionary(std::string_view text) {
  auto sections = parse_dictionary_sections(text);
  HazardDictionary merged;
  for (const auto& s : sections) {
    if (!merged.hazard_name.empty()) merged.hazard_name += '+';
    merged.hazard_name += s.hazard_name;
    merged.keywords.insert(s.keywords.begin(), s.keywords.end());
    merged.hashtags.insert(s.hashtags.begin(), s.hashtags.end());
  }
  if (merged.size() == 0) throw Error(ErrorCode::EmptyDictionary, "dictionary has no terms");
  return merged;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

HazardDictionary load_dictionary(const std::filesystem::path& path) { return parse_dictionary(read_file(path)); }

HazardDictionary load_dictionary(const std::filesystem::path& path, std::string_view hazard) {
  for (auto& s : parse_dictionary_sections(read_file(path))) {
    if (s.hazard_name == to_lower_ascii(hazard)) {
      if (s.size() == 0) throw Error(ErrorCode::EmptyDictionary, "hazard '" + s.hazard_name + "' has no terms");
      return s;
    }
  }
  throw Error(ErrorCode::EmptyDictionary, "no section for hazard '" + std::string(hazard) + "'");
}

bool matches(std::string_view text, const HazardDictionary& dict) {
  if (!dict.hashtags.empty()) {
    for (const auto& tag : hashtag_tokens(text))
      if (dict.hashtags.count(tag)) return true;
  }
  const auto tokens = word_tokens(text);
  if (tokens.empty()) return false;
  const std::unordered_set<std::string_view> present(tokens.begin(), tokens.end());
  for (const auto& kw : dict.keywords) {
    const auto parts = word_tokens(kw);
    if (parts.size() == 1) {
      if (present.count(parts[0])) return true;
      continue;
    }
    if (!present.count(parts[0])) continue;
    auto it = std::search(tokens.begin(), tokens.end(), parts.begin(), parts.end());
    if (it != tokens.end()) return true;
  }
  return false;
}

FileReplayStream::FileReplayStream(const std::filesystem::path& path, std::optional<double> rate,
                                   std::function<void(Millis)> sleeper)
    : in_(path), rate_(rate), sleeper_(std::move(sleeper)) {
  if (!in_) throw Error(ErrorCode::SourceUnavailable, "cannot open replay file " + path.string());
  if (rate_ && *rate_ <= 0) throw Error(ErrorCode::InvalidArgument, "rate must be positive");
  if (!sleeper_) sleeper_ = [](Millis d) { std::this_thread::sleep_for(d); };
}

std::optional<TweetRecord> FileReplayStream::next() {
  std::string line;
  while (std::getline(in_, line)) {
    if (trim(line).empty()) continue;
    ++stats_.read;
    try {
      auto rec = parse_record(line);
      ++stats_.accepted;
      if (rate_) sleeper_(Millis{static_cast<std::int64_t>(1000.0 / *rate_)});
      return rec;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MalformedRecord) throw;
      ++stats_.malformed;
    }
  }
  return std::nullopt;
}

FilteredStream::FilteredStream(std::unique_ptr<TweetStream> inner, std::shared_ptr<const HazardDictionary> dict,
                               FilterOptions options)
    : inner_(std::move(inner)), dict_(std::move(dict)), options_(std::move(options)) {}

std::optional<TweetRecord> FilteredStream::next() {
  while (auto rec = inner_->next()) {
    ++stats_.read;
    bool lang_ok = options_.languages.empty() || options_.languages.count(rec->lang);
    bool keep = lang_ok && matches(*rec, *dict_);
    if (!keep && lang_ok && options_.keep_children_of_kept) {
      keep = (rec->retweet_of && kept_.count(*rec->retweet_of)) || (rec->reply_to && kept_.count(*rec->reply_to));
    }
    if (keep) {
      kept_.insert(rec->id);
      ++stats_.accepted;
      rec->veracity = Veracity::Unchecked;
      return rec;
    }
    ++stats_.rejected;
  }
  stats_.malformed = inner_->stats().malformed;
  return std::nullopt;
}

std::unique_ptr<TweetStream> open_stream(const StreamSource& src, std::shared_ptr<const HazardDictionary> dict,
                                         FilterOptions options) {
  std::unique_ptr<TweetStream> inner;
  if (src.kind == StreamSource::Kind::FileReplay)
    inner = std::make_unique<FileReplayStream>(src.path, src.rate);
  else
    inner = std::make_unique<SyntheticStream>(src.synthetic);
  return std::make_unique<FilteredStream>(std::move(inner), std::move(dict), std::move(options));
}

std::vector<TweetRecord> collect(TweetStream& stream, std::size_t limit) {
  std::vector<TweetRecord> out;
  while (out.size() < limit) {
    auto r = stream.next();
    if (!r) break;
    out.push_back(std::move(*r));
  }
  return out;
}

}  // namespace contcomm::corpus
