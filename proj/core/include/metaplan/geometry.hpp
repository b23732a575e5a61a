#pragma once

#include <array>
#include <cmath>

namespace metaplan {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
    friend Vec3 operator*(double s, Vec3 a) { return a * s; }
    bool operator==(const Vec3&) const = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline double distance(Vec3 a, Vec3 b) { return norm(a - b); }

/// Normalize an angle into (-pi, pi].
inline double normalize_yaw(double yaw) {
    double a = std::fmod(yaw + kPi, 2.0 * kPi);
    if (a <= 0.0) a += 2.0 * kPi;
    return a - kPi;
}

/// Position plus heading. Yaw is kept normalized into (-pi, pi].
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double yaw = 0.0;

    Vec3 position() const { return {x, y, z}; }
    bool operator==(const Pose&) const = default;
};

/// Rotate a vector by yaw about the z axis.
inline Vec3 rotate_yaw(Vec3 v, double yaw) {
    double c = std::cos(yaw);
    double s = std::sin(yaw);
    return {c * v.x - s * v.y, s * v.x + c * v.y, v.z};
}

/// A capsule (segment with radius). A sphere is a zero-length capsule.
struct Capsule {
    Vec3 a;
    Vec3 b;
    double radius = 0.0;
};

/// Closest distance between two segments, with the closest point pair.
struct SegmentDistance {
    double dist = 0.0;
    Vec3 on_a;
    Vec3 on_b;
};

SegmentDistance segment_segment_distance(Vec3 p1, Vec3 q1, Vec3 p2, Vec3 q2);

}  // namespace metaplan
