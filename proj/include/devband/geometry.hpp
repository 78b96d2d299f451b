#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace devband {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSqrt3 = std::numbers::sqrt3;

// Unsigned angle in [0, pi], robust for nearly (anti)parallel vectors.
inline double angle_between(const Vec3 &a, const Vec3 &b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

// Angle in (-pi, pi] rotating `a` onto `b` about `axis` (right-hand rule).
inline double signed_angle(const Vec3 &a, const Vec3 &b, const Vec3 &axis) {
    return std::atan2(a.cross(b).dot(axis), a.dot(b));
}

inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

// Rotation of v about unit axis k by angle (Rodrigues).
inline Vec3 rotate(const Vec3 &v, const Vec3 &k, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return v * c + k.cross(v) * s + k * (k.dot(v)) * (1.0 - c);
}

// Minimal rotation taking unit tangent t0 onto t1, applied to v.
// Identity when t0 == t1; undefined for exactly opposite tangents.
inline Vec3 parallel_transport(const Vec3 &v, const Vec3 &t0, const Vec3 &t1) {
    const Vec3 b = t0.cross(t1);
    const double c = t0.dot(t1);
    return v * c + b.cross(v) + b * (b.dot(v) / (1.0 + c));
}

// Any unit vector orthogonal to t.
inline Vec3 any_orthonormal(const Vec3 &t) {
    const Vec3 seed = std::abs(t.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    return (seed - seed.dot(t) * t).normalized();
}

// Neumaier-compensated accumulation with a fixed summation order.
class CompensatedSum {
public:
    void add(double x) {
        const double t = m_sum + x;
        if (std::abs(m_sum) >= std::abs(x))
            m_comp += (m_sum - t) + x;
        else
            m_comp += (x - t) + m_sum;
        m_sum = t;
    }
    double value() const { return m_sum + m_comp; }

private:
    double m_sum = 0.0, m_comp = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
    CompensatedSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

} // namespace devband
