#include "contcomm/geohash.hpp"

namespace contcomm::geohash {

namespace {
constexpr std::string_view kAlphabet = "0123456789bcdefghjkmnpqrstuvwxyz";
}

std::string encode(double lat, double lon, int precision) {
  if (precision < 1 || precision > 12) throw Error(ErrorCode::InvalidArgument, "geohash precision must be 1..12");
  if (!valid_latlon(lat, lon)) throw Error(ErrorCode::InvalidArgument, "coordinates out of range");
  double lat_lo = -90, lat_hi = 90, lon_lo = -180, lon_hi = 180;
  std::string out;
  out.reserve(static_cast<std::size_t>(precision));
  bool even = true;
  int bits = 0, ch = 0;
  while (static_cast<int>(out.size()) < precision) {
    double& lo = even ? lon_lo : lat_lo;
    double& hi = even ? lon_hi : lat_hi;
    const double v = even ? lon : lat;
    const double mid = (lo + hi) / 2;
    ch <<= 1;
    if (v >= mid) {
      ch |= 1;
      lo = mid;
    } else {
      hi = mid;
    }
    even = !even;
    if (++bits == 5) {
      out += kAlphabet[static_cast<std::size_t>(ch)];
      bits = ch = 0;
    }
  }
  return out;
}

Cell decode(std::string_view hash) {
  Cell c{-90, 90, -180, 180};
  bool even = true;
  for (char h : hash) {
    auto pos = kAlphabet.find(h);
    if (pos == std::string_view::npos) throw Error(ErrorCode::InvalidArgument, "bad geohash character");
    for (int b = 4; b >= 0; --b) {
      const bool bit = (pos >> b) & 1u;
      double& lo = even ? c.lon_min : c.lat_min;
      double& hi = even ? c.lon_max : c.lat_max;
      const double mid = (lo + hi) / 2;
      (bit ? lo : hi) = mid;
      even = !even;
    }
  }
  return c;
}

ShardRouter::ShardRouter(std::size_t shards, int precision) : shards_(shards), precision_(precision) {
  if (shards_ == 0) throw Error(ErrorCode::InvalidArgument, "need at least one shard");
  if (precision_ < 1 || precision_ > 12) throw Error(ErrorCode::InvalidArgument, "geohash precision must be 1..12");
}

std::size_t ShardRouter::shard_of_hash(std::string_view gh) const {
  return static_cast<std::size_t>(fnv1a64(gh.substr(0, static_cast<std::size_t>(precision_))) % shards_);
}

std::size_t ShardRouter::shard_of(const GeoPoint& p) const {
  if (!p.resolved() || !valid_latlon(p.lat, p.lon)) return overflow_shard();
  return shard_of_hash(encode(p.lat, p.lon, precision_));
}

}  // namespace contcomm::geohash
