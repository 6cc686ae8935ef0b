#include "contcomm/geoloc.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace contcomm {

std::string_view to_string(GeoSource s) {
  switch (s) {
    case GeoSource::Device: return "device";
    case GeoSource::PlaceCentroid: return "place_centroid";
    case GeoSource::Gazetteer: return "gazetteer";
    case GeoSource::Unresolved: return "unresolved";
  }
  return "unresolved";
}

GeoSource geo_source_from_string(std::string_view s) {
  if (s == "device") return GeoSource::Device;
  if (s == "place_centroid") return GeoSource::PlaceCentroid;
  if (s == "gazetteer") return GeoSource::Gazetteer;
  return GeoSource::Unresolved;
}

double haversine(const GeoPoint& a, const GeoPoint& b) {
  if (!a.resolved() || !b.resolved()) throw Error(ErrorCode::UnresolvedInput, "haversine on an unresolved point");
  return haversine_km(a.lat, a.lon, b.lat, b.lon);
}

}  // namespace contcomm

namespace contcomm::geoloc {

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

}  // namespace

Gazetteer::Gazetteer(std::vector<GazetteerEntry> entries) : entries_(std::move(entries)) {
  for (auto& e : entries_) {
    e.name = join(corpus::word_tokens(e.name));
    if (e.name.empty()) throw Error(ErrorCode::MalformedRecord, "gazetteer entry with empty name");
  }
  std::stable_sort(entries_.begin(), entries_.end(), [](const GazetteerEntry& a, const GazetteerEntry& b) {
    auto na = std::count(a.name.begin(), a.name.end(), ' ');
    auto nb = std::count(b.name.begin(), b.name.end(), ' ');
    if (na != nb) return na > nb;
    if (a.name != b.name) return a.name < b.name;
    return a.population > b.population;
  });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    // Sorted so the first entry per name has the highest population.
    by_key_.emplace(e.name, i);
    max_tokens_ = std::max<std::size_t>(max_tokens_, 1 + std::count(e.name.begin(), e.name.end(), ' '));
  }
}

Gazetteer Gazetteer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open gazetteer " + path.string());
  std::vector<GazetteerEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() < 3) throw Error(ErrorCode::MalformedRecord, "gazetteer line " + std::to_string(lineno));
    GazetteerEntry e;
    e.name = to_lower_ascii(cols[0]);
    try {
      e.lat = std::stod(cols[1]);
      e.lon = std::stod(cols[2]);
      e.population = cols.size() > 3 && !cols[3].empty() ? std::stoll(cols[3]) : 0;
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedRecord, "gazetteer line " + std::to_string(lineno) + ": bad number");
    }
    if (!valid_latlon(e.lat, e.lon))
      throw Error(ErrorCode::MalformedRecord, "gazetteer line " + std::to_string(lineno) + ": out of range");
    entries.push_back(std::move(e));
  }
  return Gazetteer(std::move(entries));
}

const GazetteerEntry* Gazetteer::find_in(std::string_view text) const {
  if (entries_.empty()) return nullptr;
  const auto tokens = corpus::word_tokens(text);
  const GazetteerEntry* best = nullptr;
  std::size_t best_len = 0;
  for (std::size_t start = 0; start < tokens.size(); ++start) {
    std::string key;
    for (std::size_t len = 1; len <= max_tokens_ && start + len <= tokens.size(); ++len) {
      if (len > 1) key += ' ';
      key += tokens[start + len - 1];
      auto it = by_key_.find(key);
      if (it == by_key_.end()) continue;
      const auto& cand = entries_[it->second];
      if (len > best_len || (len == best_len && cand.population > best->population)) {
        best = &cand;
        best_len = len;
      }
    }
  }
  return best;
}

GeoPoint resolve(const corpus::TweetRecord& rec, const Gazetteer& gaz) {
  if (rec.coords && valid_latlon(rec.coords->lat, rec.coords->lon))
    return {rec.coords->lat, rec.coords->lon, GeoSource::Device};
  if (rec.place_bbox) {
    double lat = 0.0, lon = 0.0;
    for (const auto& p : *rec.place_bbox) {
      lat += p.lat;
      lon += p.lon;
    }
    return {lat / 4.0, lon / 4.0, GeoSource::PlaceCentroid};
  }
  if (const auto* hit = gaz.find_in(rec.text)) return {hit->lat, hit->lon, GeoSource::Gazetteer};
  return GeoPoint::unresolved();
}

}  // namespace contcomm::geoloc
