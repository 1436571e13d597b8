#pragma once

// Serial-chain rigid body dynamics in body-frame spatial (Plucker)
// coordinates, ordering (angular; linear).
//
// Generalized velocity convention (matches Velocity::flat):
//   v_gen = [base angular velocity (base body frame),
//            base linear velocity of the body origin (world frame),
//            joint rates]
// The mixed frame makes the base linear block of the mass matrix m*I and
// keeps gravity constant, at the cost of one velocity-product correction
// when converting generalized accelerations to base spatial acceleration.
//
// Everything here is linear in the per-body inertial parameters
//   pi_b = [m, h, I_origin] (see inertia.hpp), which id_pi_regressor
// exposes; gradients of any dynamics residual with respect to inertial
// parameters are exact basis-vector evaluations, never finite differences.

#include "cisid/inertia.hpp"
#include "cisid/math.hpp"
#include "cisid/model.hpp"
#include "cisid/state.hpp"

#include <vector>

namespace cisid {

using Mat6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;

namespace spatial {

// Motion cross product: (w;v) x (w';v') = (w x w'; w x v' + v x w').
inline Vec6 crm(const Vec6& a, const Vec6& b)
{
    Vec6 out;
    out.head<3>() = a.head<3>().cross(b.head<3>());
    out.tail<3>() = a.head<3>().cross(b.tail<3>()) + a.tail<3>().cross(b.head<3>());
    return out;
}

// Force cross product: (w;v) x* (n;f) = (w x n + v x f; w x f).
inline Vec6 crf(const Vec6& a, const Vec6& b)
{
    Vec6 out;
    out.head<3>() = a.head<3>().cross(b.head<3>()) + a.tail<3>().cross(b.tail<3>());
    out.tail<3>() = a.head<3>().cross(b.tail<3>());
    return out;
}

// Spatial inertia about the body origin: momentum (n;l) = G (w;v).
inline Mat6 inertia_matrix(const BodyInertia& b)
{
    const Vec3 h = b.mass * b.com;
    Mat6 g;
    g.topLeftCorner<3, 3>() = b.rot_inertia;
    g.topRightCorner<3, 3>() = skew(h);
    g.bottomLeftCorner<3, 3>() = skew(h).transpose();
    g.bottomRightCorner<3, 3>() = b.mass * Mat3::Identity();
    return g;
}

// Twist transform from frame b to frame a given the pose of b in a.
inline Mat6 motion_transform(const Mat3& rot_ab, const Vec3& pos_ab)
{
    Mat6 x = Mat6::Zero();
    x.topLeftCorner<3, 3>() = rot_ab;
    x.bottomLeftCorner<3, 3>() = skew(pos_ab) * rot_ab;
    x.bottomRightCorner<3, 3>() = rot_ab;
    return x;
}

// Wrench of a uniform world-frame acceleration field (gravity) on a body,
// in body coordinates about the body origin. Linear in (m, h).
inline Vec6 uniform_field_wrench(const BodyInertia& b, const Mat3& rot_world_body,
                                 const Vec3& accel_world)
{
    const Vec3 a_body = rot_world_body.transpose() * accel_world;
    Vec6 w;
    w.head<3>() = (b.mass * b.com).cross(a_body);
    w.tail<3>() = b.mass * a_body;
    return w;
}

}  // namespace spatial

struct Kinematics {
    std::vector<Mat3> rot;       // body orientation, body -> world
    std::vector<Vec3> pos;       // body origin in world
    std::vector<Mat6> xform;     // xform[i] maps parent twists into body i coords (i >= 1)
    std::vector<Vec6> subspace;  // joint motion subspace, child coords
    std::vector<Mat6X> body_jac;  // W_i: v_gen -> body i twist in body i coords
};

inline Kinematics forward_kinematics(const Model& m, const Configuration& q)
{
    const int nb = m.n_bodies();
    const int nv = m.n_vel();
    Kinematics kin;
    kin.rot.resize(nb);
    kin.pos.resize(nb);
    kin.xform.resize(nb);
    kin.subspace.resize(m.n_joints());
    kin.body_jac.resize(nb);

    kin.rot[0] = q.base_orientation.toRotationMatrix();
    kin.pos[0] = q.base_position;
    kin.body_jac[0] = Mat6X::Zero(6, nv);
    kin.body_jac[0].topLeftCorner<3, 3>() = Mat3::Identity();
    kin.body_jac[0].block<3, 3>(3, 3) = kin.rot[0].transpose();

    for (int i = 1; i < nb; ++i) {
        const RevoluteJoint& jnt = m.joints[i - 1];
        const Mat3 rot_joint = (jnt.parent_orientation *
                                Quat(Eigen::AngleAxisd(q.joint_angles[i - 1], jnt.axis)))
                                   .toRotationMatrix();
        const Mat3 rot_wj = kin.rot[i - 1] * rot_joint;
        const Vec3 pos_wj = kin.pos[i - 1] + kin.rot[i - 1] * jnt.parent_position;
        const Mat3 rot_cj = jnt.child_orientation.toRotationMatrix();
        kin.rot[i] = rot_wj * rot_cj.transpose();
        kin.pos[i] = pos_wj - kin.rot[i] * jnt.child_position;

        const Mat3 rot_rel = kin.rot[i].transpose() * kin.rot[i - 1];
        const Vec3 pos_rel = kin.rot[i].transpose() * (kin.pos[i - 1] - kin.pos[i]);
        kin.xform[i] = spatial::motion_transform(rot_rel, pos_rel);
        kin.subspace[i - 1] = jnt.motion_subspace();

        kin.body_jac[i] = kin.xform[i] * kin.body_jac[i - 1];
        kin.body_jac[i].col(6 + (i - 1)) += kin.subspace[i - 1];
    }
    return kin;
}

inline std::vector<Vec6> body_twists(const Kinematics& kin, const Velocity& v)
{
    const VecX vg = v.flat();
    std::vector<Vec6> u(kin.rot.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = kin.body_jac[i] * vg;
    return u;
}

// Body spatial accelerations for a given generalized acceleration. The base
// correction term converts a world-frame linear acceleration into the body
// frame derivative of the body-frame twist.
inline std::vector<Vec6> body_accelerations(const Kinematics& kin, const std::vector<Vec6>& u,
                                            const VecX& v_gen, const VecX& a_gen)
{
    std::vector<Vec6> du(u.size());
    du[0].head<3>() = a_gen.head<3>();
    du[0].tail<3>() = kin.rot[0].transpose() * a_gen.segment<3>(3) -
                      v_gen.head<3>().cross(kin.rot[0].transpose() * v_gen.segment<3>(3));
    for (std::size_t i = 1; i < u.size(); ++i) {
        const Vec6 su = kin.subspace[i - 1] * v_gen[6 + static_cast<Eigen::Index>(i) - 1];
        du[i] = kin.xform[i] * du[i - 1] +
                kin.subspace[i - 1] * a_gen[6 + static_cast<Eigen::Index>(i) - 1] +
                spatial::crm(u[i], su);
    }
    return du;
}

inline MatX mass_matrix(const Model& m, const Kinematics& kin)
{
    MatX mm = MatX::Zero(m.n_vel(), m.n_vel());
    for (int i = 0; i < m.n_bodies(); ++i) {
        const Mat6 g = spatial::inertia_matrix(m.bodies[i].inertia);
        mm.noalias() += kin.body_jac[i].transpose() * g * kin.body_jac[i];
    }
    return mm;
}

// Generalized force from per-body wrenches given in body coordinates.
inline VecX generalized_force(const Kinematics& kin, const std::vector<Vec6>& wrench_body)
{
    VecX tau = VecX::Zero(kin.body_jac[0].cols());
    for (std::size_t i = 0; i < wrench_body.size(); ++i) {
        tau.noalias() += kin.body_jac[i].transpose() * wrench_body[i];
    }
    return tau;
}

// Generalized gravity force for the model's believed gravity magnitude.
inline VecX gravity_force(const Model& m, const Kinematics& kin)
{
    const Vec3 g_world(0.0, 0.0, -m.gravity);
    std::vector<Vec6> w(m.bodies.size());
    for (int i = 0; i < m.n_bodies(); ++i) {
        w[i] = spatial::uniform_field_wrench(m.bodies[i].inertia, kin.rot[i], g_world);
    }
    return generalized_force(kin, w);
}

// Generalized force required to realize a_gen at (q, v) with gravity
// g_world and optional extra body wrenches:
//   ID = M(q) a + bias(q, v) - tau_gravity - tau_external.
inline VecX inverse_dynamics(const Model& m, const Kinematics& kin, const Velocity& v,
                             const VecX& a_gen, const Vec3& g_world,
                             const std::vector<Vec6>* ext_wrench_body = nullptr)
{
    const VecX vg = v.flat();
    const std::vector<Vec6> u = body_twists(kin, v);
    const std::vector<Vec6> du = body_accelerations(kin, u, vg, a_gen);
    std::vector<Vec6> f(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const Mat6 g = spatial::inertia_matrix(m.bodies[i].inertia);
        f[i] = g * du[i] + spatial::crf(u[i], g * u[i]) -
               spatial::uniform_field_wrench(m.bodies[i].inertia, kin.rot[i], g_world);
        if (ext_wrench_body != nullptr) f[i] -= (*ext_wrench_body)[i];
    }
    return generalized_force(kin, f);
}

inline VecX bias_force(const Model& m, const Kinematics& kin, const Velocity& v)
{
    return inverse_dynamics(m, kin, v, VecX::Zero(m.n_vel()), Vec3::Zero());
}

// Regressor of inverse dynamics in the stacked inertial parameters:
//   inverse_dynamics(q, v, a, g) == id_pi_regressor(q, v, a, g) * pi_all
// with pi_all = [pi_body0; pi_body1; ...], 10 entries per body. External
// wrenches are parameter independent and excluded.
inline MatX id_pi_regressor(const Model& m, const Kinematics& kin, const Velocity& v,
                            const VecX& a_gen, const Vec3& g_world)
{
    const int nb = m.n_bodies();
    const VecX vg = v.flat();
    const std::vector<Vec6> u = body_twists(kin, v);
    const std::vector<Vec6> du = body_accelerations(kin, u, vg, a_gen);
    MatX y = MatX::Zero(m.n_vel(), 10 * nb);
    for (int b = 0; b < nb; ++b) {
        for (int k = 0; k < 10; ++k) {
            Pi10 pi = Pi10::Zero();
            pi[k] = 1.0;
            const Vec3 h = pi.segment<3>(1);
            Mat3 rot;
            rot << pi[4], pi[7], pi[8],
                   pi[7], pi[5], pi[9],
                   pi[8], pi[9], pi[6];
            Mat6 g = Mat6::Zero();
            g.topLeftCorner<3, 3>() = rot;
            g.topRightCorner<3, 3>() = skew(h);
            g.bottomLeftCorner<3, 3>() = skew(h).transpose();
            g.bottomRightCorner<3, 3>() = pi[0] * Mat3::Identity();

            const Vec3 a_body = kin.rot[b].transpose() * g_world;
            Vec6 w_field;
            w_field.head<3>() = h.cross(a_body);
            w_field.tail<3>() = pi[0] * a_body;

            const Vec6 f = g * du[b] + spatial::crf(u[b], g * u[b]) - w_field;
            y.col(10 * b + k) = kin.body_jac[b].transpose() * f;
        }
    }
    return y;
}

inline Pi10 body_pi(const Model& m, int body) { return m.bodies[body].inertia.to_pi(); }

inline VecX stacked_pi(const Model& m)
{
    VecX pi(10 * m.n_bodies());
    for (int b = 0; b < m.n_bodies(); ++b) pi.segment<10>(10 * b) = body_pi(m, b);
    return pi;
}

// Unconstrained generalized acceleration: gravity plus optional external
// wrenches and an additive learned correction.
inline VecX continuous_acceleration(const Model& m, const Kinematics& kin, const Velocity& v,
                                    const std::vector<Vec6>* ext_wrench_body = nullptr,
                                    const VecX* residual = nullptr)
{
    VecX tau = gravity_force(m, kin) - bias_force(m, kin, v);
    if (ext_wrench_body != nullptr) tau += generalized_force(kin, *ext_wrench_body);
    const MatX mm = mass_matrix(m, kin);
    VecX a = mm.ldlt().solve(tau);
    if (residual != nullptr) a += *residual;
    return a;
}

inline double kinetic_energy(const Model& m, const Kinematics& kin, const Velocity& v)
{
    const VecX vg = v.flat();
    return 0.5 * vg.dot(mass_matrix(m, kin) * vg);
}

// Semi-implicit configuration update: world position advances with the
// world-frame linear velocity, orientation with the exponential of the
// body-frame angular velocity.
inline Configuration configuration_step(const Configuration& q, const Velocity& v, double dt)
{
    Configuration out = q;
    out.base_position += dt * v.base_linear;
    out.base_orientation = (q.base_orientation * quat_exp(Vec3(dt * v.base_angular))).normalized();
    out.joint_angles += dt * v.joint_rates;
    return out;
}

}  // namespace cisid
