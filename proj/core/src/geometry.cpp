#include "metaplan/geometry.hpp"

#include <algorithm>

namespace metaplan {

// Standard segment-segment closest point computation (Ericson, Real-Time
// Collision Detection, 5.1.9), clamping the line parameters into [0, 1].
SegmentDistance segment_segment_distance(Vec3 p1, Vec3 q1, Vec3 p2, Vec3 q2) {
    const Vec3 d1 = q1 - p1;
    const Vec3 d2 = q2 - p2;
    const Vec3 r = p1 - p2;
    const double a = dot(d1, d1);
    const double e = dot(d2, d2);
    const double f = dot(d2, r);
    constexpr double kEps = 1e-12;

    double s = 0.0;
    double t = 0.0;
    if (a <= kEps && e <= kEps) {
        // Both segments degenerate to points.
    } else if (a <= kEps) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = dot(d1, r);
        if (e <= kEps) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = dot(d1, d2);
            const double denom = a * e - b * b;
            if (denom > kEps) {
                s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
            }
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    const Vec3 ca = p1 + d1 * s;
    const Vec3 cb = p2 + d2 * t;
    return {distance(ca, cb), ca, cb};
}

}  // namespace metaplan
