#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cctype>

#include "contcomm/corpus.hpp"
#include "support.hpp"

using namespace contcomm;
using namespace contcomm::corpus;

namespace {

std::filesystem::path write_lines(const std::filesystem::path& dir, const std::string& name,
                                  const std::vector<std::string>& lines) {
  auto p = dir / name;
  std::ofstream out(p);
  for (const auto& l : lines) out << l << '\n';
  return p;
}

std::string line(const std::string& id, const std::string& text, const std::string& extra = "") {
  return R"({"id":")" + id + R"(","lang":"en","created_at":"2021-09-01T12:00:00Z","text":")" + text +
         R"(","user_id":"u1")" + extra + "}";
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("dictionary: one section parses into keywords and hashtags") {
  auto d = parse_dictionary("[hazard:flood]\nkeywords = rain, flood\nhashtags = #flood\n");
  CHECK(d.hazard_name == "flood");
  CHECK(d.keywords == std::set<std::string>{"rain", "flood"});
  CHECK(d.hashtags == std::set<std::string>{"#flood"});
  CHECK(d.size() == 3);
}

TEST_CASE("dictionary: duplicates collapse and case folds") {
  auto d = parse_dictionary("[hazard:Flood]\nkeywords = rain, RAIN, rain\nkeywords=Rain\nhashtags=#Flood,#flood\n");
  CHECK(d.keywords.size() == 1);
  CHECK(d.keywords.count("rain") == 1);
  CHECK(d.hashtags.size() == 1);
  CHECK(d.hazard_name == "flood");
}

TEST_CASE("dictionary: shipped file covers the flood keyword table") {
  auto d = load_dictionary(testing::data_dir() / "hazards.dict", "flood");
  for (const char* k : {"flood", "rain", "precipitation", "floodplain", "water level", "inundation"}) {
    CAPTURE(k);
    CHECK(d.keywords.count(k) == 1);
  }
  CHECK(d.hashtags.count("#rainfall") == 1);
  for (const auto& h : d.hashtags) CHECK(h.front() == '#');

  auto all = load_dictionary(testing::data_dir() / "hazards.dict");
  CHECK(all.hazard_name == "flood+covid-19");
  CHECK(all.keywords.count("lockdown") == 1);
}

TEST_CASE("dictionary: syntax and emptiness errors") {
  CHECK(code_of([] { parse_dictionary("keywords = rain\n"); }) == ErrorCode::MalformedDictionary);
  CHECK(code_of([] { parse_dictionary("[flood]\nkeywords = rain\n"); }) == ErrorCode::MalformedDictionary);
  CHECK(code_of([] { parse_dictionary("[hazard:flood]\nhashtags = flood\n"); }) == ErrorCode::MalformedDictionary);
  CHECK(code_of([] { parse_dictionary("[hazard:flood]\nwords = rain\n"); }) == ErrorCode::MalformedDictionary);
  CHECK(code_of([] { parse_dictionary("[hazard:flood]\n; nothing\n"); }) == ErrorCode::EmptyDictionary);
  CHECK(code_of([] { parse_dictionary("[hazard:flood]\nkeywords = , ,\n"); }) == ErrorCode::EmptyDictionary);
  CHECK(code_of([] { load_dictionary("/nonexistent/x.dict"); }) == ErrorCode::Io);
}

TEST_CASE("matches: whole tokens, phrases, hashtags") {
  auto d = parse_dictionary("[hazard:flood]\nkeywords = rain, water level\nhashtags = #flood\n");
  CHECK(matches("Heavy rain in Masjid Al Haram", d));
  CHECK_FALSE(matches("brain surgery", d));
  CHECK(matches("flooding everywhere #flood", d));
  CHECK_FALSE(matches("flooding everywhere #floods", d));
  CHECK(matches("the WATER LEVEL is rising", d));
  CHECK_FALSE(matches("water at a new level", d));
  CHECK(matches("rain!", d));
  CHECK_FALSE(matches("", d));
}

TEST_CASE("matches is case-insensitive over random texts") {
  auto d = load_dictionary(testing::data_dir() / "hazards.dict");
  SyntheticStream s(hydro_synthetic_config(5, 300));
  std::mt19937_64 rng(3);
  while (auto r = s.next()) {
    std::string upper = r->text, mixed = r->text;
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    for (auto& c : mixed)
      if (rng() % 2) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    CHECK(matches(upper, d) == matches(r->text, d));
    CHECK(matches(mixed, d) == matches(r->text, d));
  }
}

TEST_CASE("records: parse, derived retweet flag, round trip") {
  auto r = parse_record(line("a1", "rain", R"(,"retweet_of":"a0","lat":48.85,"lon":2.35)"));
  CHECK(r.id == "a1");
  CHECK(r.is_retweet);
  CHECK(r.retweet_of == std::optional<std::string>("a0"));
  REQUIRE(r.coords);
  CHECK(r.coords->lat == 48.85);
  CHECK(r.veracity == Veracity::Unchecked);
  CHECK(parse_record(to_json_line(r)) == r);

  auto plain = parse_record(line("a2", "rain", R"(,"retweet_of":null,"reply_to":"a1")"));
  CHECK_FALSE(plain.is_retweet);
  CHECK(plain.reply_to == std::optional<std::string>("a1"));
}

TEST_CASE("records: schema and range violations") {
  for (const std::string& bad :
       {std::string("not json"), std::string("[1,2]"), line("", "rain"), line("a", "rain", R"(,"lat":91,"lon":0)"),
        line("a", "rain", R"(,"lat":10)"), line("a", "rain", R"(,"place_bbox":[[0,0],[0,1]])"),
        std::string(R"({"id":"a","lang":"en","created_at":"yesterday","text":"x","user_id":"u"})"),
        std::string(R"({"id":"a","lang":"en","created_at":"2021-09-01T00:00:00Z","user_id":"u"})")}) {
    CAPTURE(bad);
    CHECK(code_of([&] { parse_record(bad); }) == ErrorCode::MalformedRecord);
  }
}

TEST_CASE("replay: filter keeps matching records in file order, skips malformed") {
  auto dir = testing::scratch_dir("corpus");
  auto path = write_lines(dir, "five.jsonl",
                          {line("r1", "rain in town"), line("r2", "sunny day"), "{broken", line("r3", "a #flood here"),
                           line("r4", "nothing"), line("r5", "more rain")});
  auto dict = std::make_shared<HazardDictionary>(parse_dictionary("[hazard:f]\nkeywords=rain\nhashtags=#flood\n"));
  StreamSource src;
  src.path = path;
  auto stream = open_stream(src, dict, FilterOptions{{}, false});
  auto got = collect(*stream);
  REQUIRE(got.size() == 3);
  CHECK(got[0].id == "r1");
  CHECK(got[1].id == "r3");
  CHECK(got[2].id == "r5");
  CHECK(stream->stats().accepted == 3);
  CHECK(stream->stats().rejected == 2);
  CHECK(stream->stats().malformed == 1);
}

TEST_CASE("replay: filtering is idempotent") {
  auto dict = std::make_shared<HazardDictionary>(load_dictionary(testing::data_dir() / "hazards.dict"));
  auto dir = testing::scratch_dir("idem");
  auto cfg = hydro_synthetic_config(11, 400);
  cfg.topics[0].words.insert(cfg.topics[0].words.begin(), "sunshine");  // some posts will not match
  StreamSource syn;
  syn.kind = StreamSource::Kind::Synthetic;
  syn.synthetic = cfg;
  auto first = collect(*open_stream(syn, dict, FilterOptions{{}, false}));
  std::vector<std::string> lines;
  for (const auto& r : first) lines.push_back(to_json_line(r));
  StreamSource again;
  again.path = write_lines(dir, "filtered.jsonl", lines);
  auto second = collect(*open_stream(again, dict, FilterOptions{{}, false}));
  CHECK(second == first);
  CHECK(first.size() < 400);
}

TEST_CASE("replay: children of kept records survive the filter") {
  auto dir = testing::scratch_dir("children");
  auto path = write_lines(dir, "c.jsonl",
                          {line("p", "rain"), line("c", "wow", R"(,"retweet_of":"p")"),
                           line("d", "same here", R"(,"reply_to":"c")"), line("x", "unrelated", R"(,"reply_to":"q")")});
  auto dict = std::make_shared<HazardDictionary>(parse_dictionary("[hazard:f]\nkeywords=rain\n"));
  StreamSource src;
  src.path = path;
  auto got = collect(*open_stream(src, dict));
  REQUIRE(got.size() == 3);
  CHECK(got[2].id == "d");
}

TEST_CASE("replay: language restriction") {
  auto dir = testing::scratch_dir("lang");
  auto path = write_lines(dir, "l.jsonl",
                          {line("a", "rain"), R"({"id":"b","lang":"es","created_at":"2021-09-01T12:00:00Z","text":"rain","user_id":"u"})"});
  auto dict = std::make_shared<HazardDictionary>(parse_dictionary("[hazard:f]\nkeywords=rain\n"));
  StreamSource src;
  src.path = path;
  CHECK(collect(*open_stream(src, dict)).size() == 2);
  CHECK(collect(*open_stream(src, dict, FilterOptions{{"en"}, true})).size() == 1);
}

TEST_CASE("replay: pacing and missing files") {
  auto dir = testing::scratch_dir("pace");
  auto path = write_lines(dir, "p.jsonl", {line("a", "rain"), line("b", "rain")});
  std::vector<Millis> slept;
  FileReplayStream s(path, 4.0, [&](Millis d) { slept.push_back(d); });
  collect(s);
  CHECK(slept == std::vector<Millis>{Millis{250}, Millis{250}});
  CHECK(code_of([] { FileReplayStream("/nonexistent.jsonl"); }) == ErrorCode::SourceUnavailable);
}

TEST_CASE("synthetic: deterministic, ordered, valid") {
  auto a = [] {
    SyntheticStream s(hydro_synthetic_config(42, 500));
    return collect(s);
  }();
  auto b = [] {
    SyntheticStream s(hydro_synthetic_config(42, 500));
    return collect(s);
  }();
  CHECK(a == b);
  REQUIRE(a.size() == 500);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ids.insert(a[i].id);
    if (i) CHECK(a[i - 1].created_at <= a[i].created_at);
    CHECK(a[i].is_retweet == a[i].retweet_of.has_value());
    if (a[i].coords) CHECK(valid_latlon(a[i].coords->lat, a[i].coords->lon));
    CHECK(parse_record(to_json_line(a[i])) == a[i]);
  }
  CHECK(ids.size() == a.size());

  SyntheticStream other(hydro_synthetic_config(43, 500));
  CHECK(collect(other) != a);
}

TEST_CASE("synthetic: every post matches the shipped dictionary") {
  auto d = load_dictionary(testing::data_dir() / "hazards.dict");
  SyntheticStream s(hydro_synthetic_config(9, 1000));
  while (auto r = s.next()) CHECK(matches(*r, d));
}

TEST_CASE("pseudo words are distinct and stable") {
  auto w = pseudo_words(5000);
  CHECK(std::set<std::string>(w.begin(), w.end()).size() == 5000);
  CHECK(w == pseudo_words(5000));
  for (const auto& x : w) CHECK(x.size() == 5);
}

TEST_CASE("tokenizers") {
  CHECK(word_tokens("Rain, RAIN; rain-fall 42!") == std::vector<std::string>{"rain", "rain", "rain", "fall", "42"});
  CHECK(hashtag_tokens("#Flood and #rain_fall, #") == std::vector<std::string>{"#flood", "#rain_fall"});
}
