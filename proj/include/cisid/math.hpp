#pragma once

// Small math utilities shared across the library: Eigen aliases, SO(3)
// helpers (exponential/log maps, right Jacobians), and a stable FNV hash
// used for file provenance.

#include <Eigen/Core>
#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <string>

namespace cisid {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using VecX = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using MatX = Eigen::MatrixXd;
using Quat = Eigen::Quaterniond;

inline Mat3 skew(const Vec3& a)
{
    Mat3 s;
    s << 0, -a.z(), a.y(),
         a.z(), 0, -a.x(),
         -a.y(), a.x(), 0;
    return s;
}

// exp: rotation vector -> unit quaternion. Taylor branch keeps the map
// smooth through zero.
inline Quat quat_exp(const Vec3& w)
{
    const double theta = w.norm();
    if (theta < 1e-10) {
        Quat q(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z());
        q.normalize();
        return q;
    }
    const double half = 0.5 * theta;
    const double s = std::sin(half) / theta;
    return Quat(std::cos(half), s * w.x(), s * w.y(), s * w.z());
}

// log: unit quaternion -> rotation vector, |result| <= pi.
inline Vec3 quat_log(const Quat& q_in)
{
    Quat q = q_in;
    if (q.w() < 0) q.coeffs() *= -1.0;
    const Vec3 v = q.vec();
    const double vn = v.norm();
    if (vn < 1e-12) return 2.0 * v / q.w();
    const double theta = 2.0 * std::atan2(vn, q.w());
    return v * (theta / vn);
}

// Geodesic angle between two orientations, in radians, in [0, pi]. The
// atan2 form stays accurate near both 0 and pi, unlike acos of the dot.
inline double quat_angle(const Quat& a, const Quat& b)
{
    const Quat r = a.conjugate() * b;
    return 2.0 * std::atan2(r.vec().norm(), std::abs(r.w()));
}

// Right Jacobian of SO(3): Exp(u + du) = Exp(u) Exp(Jr(u) du).
inline Mat3 so3_right_jacobian(const Vec3& u)
{
    const double t = u.norm();
    const Mat3 U = skew(u);
    if (t < 1e-7) {
        return Mat3::Identity() - 0.5 * U + (1.0 / 6.0) * U * U;
    }
    const double t2 = t * t;
    const double half_sin = std::sin(0.5 * t);
    // 1 - cos(t) = 2 sin^2(t/2) avoids cancellation for small t.
    return Mat3::Identity()
        - (2.0 * half_sin * half_sin / t2) * U
        + ((t - std::sin(t)) / (t2 * t)) * U * U;
}

inline Mat3 so3_right_jacobian_inv(const Vec3& u)
{
    const double t = u.norm();
    const Mat3 U = skew(u);
    if (t < 1e-7) {
        return Mat3::Identity() + 0.5 * U + (1.0 / 12.0) * U * U;
    }
    const double t2 = t * t;
    const double c = 1.0 / t2 - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
    return Mat3::Identity() + 0.5 * U + c * U * U;
}

// FNV-1a over bytes; stable across platforms, used for config/model hashes.
inline std::uint64_t fnv1a(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace cisid
