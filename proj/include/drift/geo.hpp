#pragma once

#include <cmath>
#include <numbers>

namespace drift::geo {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kDegToRad = std::numbers::pi / 180.0;
/// Great-circle length of one degree of arc on the reference sphere.
inline constexpr double kKmPerDegree = kEarthRadiusKm * kDegToRad;
/// Pitch used to express a kilometre spacing as a lattice resolution in degrees.
inline constexpr double kKmPerDegreeEquator = 111.32;

struct LonLat {
    double lon = 0.0;
    double lat = 0.0;
};

/// Central angle between two points in radians (haversine form).
inline double central_angle(LonLat a, LonLat b) {
    const double phi1 = a.lat * kDegToRad;
    const double phi2 = b.lat * kDegToRad;
    const double dphi = phi2 - phi1;
    const double dlambda = (b.lon - a.lon) * kDegToRad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    if (h > 1.0) h = 1.0;
    return 2.0 * std::asin(std::sqrt(h));
}

inline double haversine_km(LonLat a, LonLat b) { return kEarthRadiusKm * central_angle(a, b); }

/// Great-circle distance expressed in degrees of arc.
inline double arc_degrees(LonLat a, LonLat b) { return central_angle(a, b) / kDegToRad; }

/// Metres spanned by one degree of longitude at latitude `lat_deg`.
inline double metres_per_lon_degree(double lat_deg) {
    return kKmPerDegree * 1000.0 * std::cos(lat_deg * kDegToRad);
}

inline double metres_per_lat_degree() { return kKmPerDegree * 1000.0; }

/// Wraps a longitude difference into [-180, 180).
inline double wrap_lon_delta(double d) {
    while (d >= 180.0) d -= 360.0;
    while (d < -180.0) d += 360.0;
    return d;
}

}  // namespace drift::geo
