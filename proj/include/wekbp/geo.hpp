#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "wekbp/error.hpp"

namespace wekbp {

inline constexpr double kEarthRadiusM = 6'371'000.0;

struct GeoCoord {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees

  friend bool operator==(const GeoCoord&, const GeoCoord&) = default;
};

inline GeoCoord make_geo(double lat, double lon) {
  if (!(lat >= -90.0 && lat <= 90.0)) throw DomainError("latitude out of range: " + std::to_string(lat));
  if (!(lon >= -180.0 && lon <= 180.0)) throw DomainError("longitude out of range: " + std::to_string(lon));
  return {lat, lon};
}

inline constexpr double deg_to_rad(double deg) noexcept { return deg * std::numbers::pi / 180.0; }

// Great-circle distance in meters.
inline double haversine(const GeoCoord& p1, const GeoCoord& p2) {
  const double lat1 = deg_to_rad(p1.lat);
  const double lat2 = deg_to_rad(p2.lat);
  const double dlat = lat2 - lat1;
  const double dlon = deg_to_rad(p2.lon - p1.lon);
  const double s_lat = std::sin(dlat / 2.0);
  const double s_lon = std::sin(dlon / 2.0);
  double a = s_lat * s_lat + std::cos(lat1) * std::cos(lat2) * s_lon * s_lon;
  a = std::clamp(a, 0.0, 1.0);
  const double c = 2.0 * std::asin(std::sqrt(a));
  return kEarthRadiusM * c;
}

// Meters per degree of latitude on the same sphere haversine() uses.
inline constexpr double kMetersPerDegree = kEarthRadiusM * std::numbers::pi / 180.0;

}  // namespace wekbp
