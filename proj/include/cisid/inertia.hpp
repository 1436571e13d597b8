#pragma once

// Smooth inertia parameterization. An unconstrained 10-vector theta maps to
// a positive-definite 4x4 pseudo-inertia through an exponential-Cholesky
// factor, so every theta corresponds to physically feasible inertial
// parameters and the map is smooth and invertible on the feasible set.
//
// Parameter vector layout used for regressors and metrics:
//   pi = [m, h_x, h_y, h_z, I_xx, I_yy, I_zz, I_xy, I_xz, I_yz]
// with h = m * com and I the rotational inertia about the body origin.
// Dynamics (mass matrix, bias forces, gravity wrenches) are linear in pi.

#include "cisid/math.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <stdexcept>

namespace cisid {

using Theta = Eigen::Matrix<double, 10, 1>;
using Pi10 = Eigen::Matrix<double, 10, 1>;

struct BodyInertia {
    double mass = 0.0;
    Vec3 com = Vec3::Zero();        // body frame, m
    Mat3 rot_inertia = Mat3::Zero();  // about body origin, kg m^2

    Mat4 pseudo_inertia() const
    {
        const Mat3 sigma = 0.5 * rot_inertia.trace() * Mat3::Identity() - rot_inertia;
        const Vec3 h = mass * com;
        Mat4 p;
        p.topLeftCorner<3, 3>() = sigma;
        p.topRightCorner<3, 1>() = h;
        p.bottomLeftCorner<1, 3>() = h.transpose();
        p(3, 3) = mass;
        return p;
    }

    bool is_physical(double tol = 1e-12) const
    {
        if (!(mass > 0.0)) return false;
        Eigen::SelfAdjointEigenSolver<Mat4> es(pseudo_inertia());
        return es.info() == Eigen::Success && es.eigenvalues().minCoeff() > tol;
    }

    Pi10 to_pi() const
    {
        Pi10 pi;
        pi[0] = mass;
        pi.segment<3>(1) = mass * com;
        pi[4] = rot_inertia(0, 0);
        pi[5] = rot_inertia(1, 1);
        pi[6] = rot_inertia(2, 2);
        pi[7] = rot_inertia(0, 1);
        pi[8] = rot_inertia(0, 2);
        pi[9] = rot_inertia(1, 2);
        return pi;
    }

    static BodyInertia from_pi(const Pi10& pi)
    {
        BodyInertia b;
        b.mass = pi[0];
        b.com = pi.segment<3>(1) / pi[0];
        b.rot_inertia << pi[4], pi[7], pi[8],
                         pi[7], pi[5], pi[9],
                         pi[8], pi[9], pi[6];
        return b;
    }

    // Metric form [m, com, central inertia] used by the parameter-error
    // metrics; central inertia comes from the parallel-axis shift.
    Pi10 to_metric_vector() const
    {
        const Mat3 ic = rot_inertia -
            mass * (com.squaredNorm() * Mat3::Identity() - com * com.transpose());
        Pi10 v;
        v[0] = mass;
        v.segment<3>(1) = com;
        v[4] = ic(0, 0);
        v[5] = ic(1, 1);
        v[6] = ic(2, 2);
        v[7] = ic(0, 1);
        v[8] = ic(0, 2);
        v[9] = ic(1, 2);
        return v;
    }
};

namespace detail {

// Upper-triangular factor U(theta), P = U U^T.
inline Mat4 theta_factor(const Theta& t)
{
    Mat4 u = Mat4::Zero();
    u(0, 0) = std::exp(t[0]);
    u(1, 1) = std::exp(t[1]);
    u(2, 2) = std::exp(t[2]);
    u(3, 3) = 1.0;
    u(0, 1) = t[3];
    u(0, 2) = t[4];
    u(1, 2) = t[5];
    u(0, 3) = t[6];
    u(1, 3) = t[7];
    u(2, 3) = t[8];
    return std::exp(t[9]) * u;
}

inline Mat4 theta_factor_partial(const Theta& t, int k)
{
    const double scale = std::exp(t[9]);
    Mat4 du = Mat4::Zero();
    switch (k) {
        case 0: du(0, 0) = scale * std::exp(t[0]); break;
        case 1: du(1, 1) = scale * std::exp(t[1]); break;
        case 2: du(2, 2) = scale * std::exp(t[2]); break;
        case 3: du(0, 1) = scale; break;
        case 4: du(0, 2) = scale; break;
        case 5: du(1, 2) = scale; break;
        case 6: du(0, 3) = scale; break;
        case 7: du(1, 3) = scale; break;
        case 8: du(2, 3) = scale; break;
        case 9: return theta_factor(t);  // d/dt9 = U itself
        default: throw std::out_of_range("theta index");
    }
    return du;
}

inline Pi10 pi_from_pseudo(const Mat4& p)
{
    const Mat3 sigma = p.topLeftCorner<3, 3>();
    const Mat3 rot = sigma.trace() * Mat3::Identity() - sigma;
    Pi10 pi;
    pi[0] = p(3, 3);
    pi.segment<3>(1) = p.topRightCorner<3, 1>();
    pi[4] = rot(0, 0);
    pi[5] = rot(1, 1);
    pi[6] = rot(2, 2);
    pi[7] = rot(0, 1);
    pi[8] = rot(0, 2);
    pi[9] = rot(1, 2);
    return pi;
}

}  // namespace detail

// Unscaled map theta -> pi (regressor form, inertia about body origin).
inline Pi10 raw_pi_from_theta(const Theta& t)
{
    const Mat4 u = detail::theta_factor(t);
    return detail::pi_from_pseudo(u * u.transpose());
}

// 10x10 Jacobian d(raw pi)/d(theta); the map is smooth everywhere.
inline Eigen::Matrix<double, 10, 10> raw_pi_theta_jacobian(const Theta& t)
{
    const Mat4 u = detail::theta_factor(t);
    Eigen::Matrix<double, 10, 10> jac;
    for (int k = 0; k < 10; ++k) {
        const Mat4 du = detail::theta_factor_partial(t, k);
        const Mat4 dus = du * u.transpose();
        jac.col(k) = detail::pi_from_pseudo(dus + dus.transpose());
    }
    return jac;
}

// theta -> BodyInertia with the caller-imposed mass. The raw map fixes the
// distribution; mass itself is unobservable, so the extracted inertia is
// rescaled to the imposed share.
inline BodyInertia inertia_from_theta(const Theta& t, double mass_scale)
{
    Pi10 pi = raw_pi_from_theta(t);
    const double s = mass_scale / pi[0];
    pi *= s;
    return BodyInertia::from_pi(pi);
}

// Inverse map; rejects inertias whose pseudo-inertia is not positive
// definite. inertia_from_theta(theta_from_inertia(b), b.mass) == b.
inline Theta theta_from_inertia(const BodyInertia& b)
{
    const Mat4 p = b.pseudo_inertia();
    // Reverse-order Cholesky gives the upper-triangular factor.
    Mat4 e = Mat4::Zero();
    e(0, 3) = e(1, 2) = e(2, 1) = e(3, 0) = 1.0;
    const Mat4 pr = e * p * e;
    Eigen::LLT<Mat4> llt(pr);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("theta_from_inertia: pseudo-inertia not positive definite");
    }
    const Mat4 u = e * Mat4(llt.matrixL()) * e;  // upper triangular, positive diagonal

    const double scale = u(3, 3);
    const Mat4 un = u / scale;
    Theta t;
    t[0] = std::log(un(0, 0));
    t[1] = std::log(un(1, 1));
    t[2] = std::log(un(2, 2));
    t[3] = un(0, 1);
    t[4] = un(0, 2);
    t[5] = un(1, 2);
    t[6] = un(0, 3);
    t[7] = un(1, 3);
    t[8] = un(2, 3);
    t[9] = std::log(scale);
    return t;
}

}  // namespace cisid
