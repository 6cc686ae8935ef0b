#include "contcomm/common.hpp"

#include <cctype>
#include <cstdio>

namespace contcomm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedDictionary: return "MalformedDictionary";
    case ErrorCode::EmptyDictionary: return "EmptyDictionary";
    case ErrorCode::SourceUnavailable: return "SourceUnavailable";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::UnresolvedInput: return "UnresolvedInput";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::SingleClassCorpus: return "SingleClassCorpus";
    case ErrorCode::VocabularyMismatch: return "VocabularyMismatch";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::BadResponse: return "BadResponse";
    case ErrorCode::InsufficientReference: return "InsufficientReference";
    case ErrorCode::TooFewClusters: return "TooFewClusters";
    case ErrorCode::BrokerStopped: return "BrokerStopped";
    case ErrorCode::QueueFull: return "QueueFull";
    case ErrorCode::InvalidTopic: return "InvalidTopic";
    case ErrorCode::UnknownTopic: return "UnknownTopic";
    case ErrorCode::RebalanceInProgress: return "RebalanceInProgress";
    case ErrorCode::ShardUnavailable: return "ShardUnavailable";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::QuorumLost: return "QuorumLost";
    case ErrorCode::UnknownUser: return "UnknownUser";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Timestamp SystemClock::now() const {
  return std::chrono::time_point_cast<Millis>(std::chrono::system_clock::now());
}

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace

Timestamp parse_iso8601(std::string_view s) {
  using namespace std::chrono;
  auto fail = [&] { return Error(ErrorCode::MalformedRecord, "bad timestamp '" + std::string(s) + "'"); };
  int y, mo, d, h, mi, se;
  if (!read_int(s, 0, 4, y) || s.size() < 19 || s[4] != '-' || !read_int(s, 5, 2, mo) || s[7] != '-' ||
      !read_int(s, 8, 2, d) || (s[10] != 'T' && s[10] != ' ') || !read_int(s, 11, 2, h) || s[13] != ':' ||
      !read_int(s, 14, 2, mi) || s[16] != ':' || !read_int(s, 17, 2, se))
    throw fail();
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 60) throw fail();

  std::size_t pos = 19;
  int ms = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      if (digits < 3) ms = ms * 10 + (s[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) throw fail();
    for (int i = digits; i < 3; ++i) ms *= 10;
  }
  minutes offset{0};
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      ++pos;
    } else if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
      int oh, om;
      if (!read_int(s, pos + 1, 2, oh) || !read_int(s, pos + 4, 2, om)) throw fail();
      offset = minutes{oh * 60 + om} * (s[pos] == '-' ? -1 : 1);
      pos += 6;
    } else {
      throw fail();
    }
  }
  auto tp = sys_days{ymd} + hours{h} + minutes{mi} + seconds{se} + milliseconds{ms} - offset;
  return time_point_cast<milliseconds>(tp);
}

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  auto day_point = floor<days>(t);
  year_month_day ymd{day_point};
  hh_mm_ss<milliseconds> tod{t - day_point};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()), static_cast<int>(tod.subseconds().count()));
  return buf;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace contcomm
