#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "contcomm/common.hpp"

namespace contcomm {

/// Mean Earth radius (IUGG) in kilometres.
inline constexpr double kEarthRadiusKm = 6371.0088;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const LatLon&, const LatLon&) = default;
};

enum class GeoSource { Device, PlaceCentroid, Gazetteer, Unresolved };

std::string_view to_string(GeoSource s);
GeoSource geo_source_from_string(std::string_view s);

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
  GeoSource source = GeoSource::Unresolved;

  bool resolved() const noexcept { return source != GeoSource::Unresolved; }
  LatLon latlon() const noexcept { return {lat, lon}; }

  static GeoPoint unresolved() { return {}; }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline bool valid_latlon(double lat, double lon) {
  return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 && lon >= -180.0 &&
         lon <= 180.0;
}

template <typename Scalar>
constexpr Scalar deg2rad(Scalar deg) {
  return deg * std::numbers::pi_v<Scalar> / Scalar(180);
}

template <typename Scalar>
constexpr Scalar rad2deg(Scalar rad) {
  return rad * Scalar(180) / std::numbers::pi_v<Scalar>;
}

/// Great-circle distance in km between two (lat, lon) pairs given in degrees.
template <typename Scalar>
Scalar haversine_km(Scalar lat1, Scalar lon1, Scalar lat2, Scalar lon2,
                    Scalar radius = Scalar(kEarthRadiusKm)) {
  using std::asin;
  using std::cos;
  using std::min;
  using std::sin;
  using std::sqrt;
  const Scalar dlat = deg2rad(lat2 - lat1);
  const Scalar dlon = deg2rad(lon2 - lon1);
  const Scalar s1 = sin(dlat / Scalar(2));
  const Scalar s2 = sin(dlon / Scalar(2));
  const Scalar h = s1 * s1 + cos(deg2rad(lat1)) * cos(deg2rad(lat2)) * s2 * s2;
  return Scalar(2) * radius * asin(min(Scalar(1), sqrt(h)));
}

/// Row-wise overload for Eigen row expressions of (lat, lon).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar haversine_km(const Eigen::MatrixBase<DerivedA>& a,
                                       const Eigen::MatrixBase<DerivedB>& b) {
  return haversine_km(a(0), a(1), b(0), b(1));
}

/// Throws UnresolvedInput when either point carries no location.
double haversine(const GeoPoint& a, const GeoPoint& b);

inline double haversine(const LatLon& a, const LatLon& b) {
  return haversine_km(a.lat, a.lon, b.lat, b.lon);
}

/// Spherical mean of an n x 2 (lat, lon) matrix: normalised mean of unit
/// vectors. Falls back to the first row when the mean vector vanishes.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 1, 2> spherical_centroid(const Eigen::MatrixBase<Derived>& pts) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, 3, 1> acc = Eigen::Matrix<Scalar, 3, 1>::Zero();
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Scalar la = deg2rad(pts(i, 0));
    const Scalar lo = deg2rad(pts(i, 1));
    acc += Eigen::Matrix<Scalar, 3, 1>(std::cos(la) * std::cos(lo), std::cos(la) * std::sin(lo), std::sin(la));
  }
  Eigen::Matrix<Scalar, 1, 2> out;
  const Scalar norm = acc.norm();
  if (pts.rows() == 0) return out.setZero();
  if (norm < Scalar(1e-12)) return pts.row(0);
  acc /= norm;
  out(0) = rad2deg(std::asin(std::clamp(acc.z(), Scalar(-1), Scalar(1))));
  out(1) = rad2deg(std::atan2(acc.y(), acc.x()));
  // Keep exact inputs exact when all points coincide.
  if ((pts.rowwise() - pts.row(0)).cwiseAbs().maxCoeff() == Scalar(0)) return pts.row(0);
  return out;
}

}  // namespace contcomm
