#pragma once

#include <string>
#include <string_view>

#include "contcomm/geo.hpp"

namespace contcomm::geohash {

inline constexpr int kDefaultPrecision = 4;

/// Standard base-32 geohash (longitude bit first).
std::string encode(double lat, double lon, int precision = kDefaultPrecision);

struct Cell {
  double lat_min, lat_max, lon_min, lon_max;
  LatLon center() const { return {(lat_min + lat_max) / 2, (lon_min + lon_max) / 2}; }
};

/// Throws InvalidArgument on characters outside the alphabet.
Cell decode(std::string_view hash);

/// Maps locations to shards by a hash of their geohash prefix. Unresolved
/// points go to the overflow shard, whose index is shard_count().
class ShardRouter {
 public:
  explicit ShardRouter(std::size_t shards = 4, int precision = kDefaultPrecision);

  std::size_t shard_count() const { return shards_; }
  std::size_t overflow_shard() const { return shards_; }
  std::size_t total_shards() const { return shards_ + 1; }
  int precision() const { return precision_; }

  std::size_t shard_of(const GeoPoint& p) const;
  std::size_t shard_of_hash(std::string_view geohash) const;

 private:
  std::size_t shards_;
  int precision_;
};

}  // namespace contcomm::geohash
