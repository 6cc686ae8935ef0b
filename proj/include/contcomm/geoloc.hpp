#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "contcomm/corpus.hpp"
#include "contcomm/geo.hpp"

namespace contcomm::geoloc {

struct GazetteerEntry {
  std::string name;  // lowercase
  double lat = 0.0;
  double lon = 0.0;
  long long population = 0;
};

/// Name -> coordinates lookup used as the named-entity geocoder. Matching is
/// on word tokens, longest name first, highest population on ties.
class Gazetteer {
 public:
  Gazetteer() = default;
  explicit Gazetteer(std::vector<GazetteerEntry> entries);

  /// TSV `name<TAB>lat<TAB>lon<TAB>population`; throws Io / MalformedRecord.
  static Gazetteer load(const std::filesystem::path& path);

  const std::vector<GazetteerEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Longest token-sequence match anywhere in `text`.
  const GazetteerEntry* find_in(std::string_view text) const;

 private:
  std::vector<GazetteerEntry> entries_;  // sorted by (token count desc, name)
  std::unordered_map<std::string, std::size_t> by_key_;  // joined tokens -> best entry
  std::size_t max_tokens_ = 0;
};

/// Priority: device coordinates, place bounding-box centroid, gazetteer
/// match on the raw text, otherwise Unresolved.
GeoPoint resolve(const corpus::TweetRecord& rec, const Gazetteer& gaz);

}  // namespace contcomm::geoloc
