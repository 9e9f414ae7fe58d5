#pragma once

#include <array>
#include <cmath>

namespace thz {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double d) { return d * kPi / 180.0; }
inline constexpr double rad2deg(double r) { return r * 180.0 / kPi; }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
    constexpr double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

    friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend constexpr Vec3 operator*(Vec3 a, double s) { return s * a; }
    friend constexpr bool operator==(Vec3 a, Vec3 b) = default;
};

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(Vec3 a, Vec3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline double distance(Vec3 a, Vec3 b) { return norm(a - b); }
inline Vec3 normalized(Vec3 a) { return (1.0 / norm(a)) * a; }

/// Wrap an angle in degrees to [0, 360).
inline double wrap360(double deg) {
    double w = std::fmod(deg, 360.0);
    if (w < 0.0) w += 360.0;
    if (w >= 360.0) w -= 360.0;
    return w;
}

/// Wrap an angle difference in degrees to [-180, 180).
inline double wrap180(double deg) { return wrap360(deg + 180.0) - 180.0; }

/// Global-frame direction angles: azimuth from +x counterclockwise in
/// [0, 360), elevation from the horizontal plane in [-90, 90].
struct Direction {
    double az_deg = 0.0;
    double el_deg = 0.0;
};

inline Direction direction_of(Vec3 v) {
    const double h = std::hypot(v.x, v.y);
    return {wrap360(rad2deg(std::atan2(v.y, v.x))), rad2deg(std::atan2(v.z, h))};
}

inline Vec3 unit_vector(Direction d) {
    const double az = deg2rad(d.az_deg);
    const double el = deg2rad(d.el_deg);
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

/// Free-space (Friis) path gain in dB for an unfolded length in meters.
inline double friis_gain_db(double length_m, double freq_hz) {
    return -20.0 * std::log10(4.0 * kPi * length_m * freq_hz / kSpeedOfLight);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

}  // namespace thz
