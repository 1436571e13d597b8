#include "cisid/multibody.hpp"

#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace cisid;
using Catch::Approx;

namespace {

Model make_single(Rng& rng)
{
    return test::single_body_model(test::random_inertia(rng, 0.37));
}

Model make_chain(Rng& rng)
{
    return test::two_link_model(test::random_inertia(rng, 0.25),
                                test::random_inertia(rng, 0.25));
}

Vec3 world_com_velocity(const Kinematics& kin, const Vec6& twist, const Vec3& com, int body)
{
    return kin.rot[body] * (twist.tail<3>() + twist.head<3>().cross(com));
}

// Fourth order integrator over (p, quat, joints, v); quaternion integrated
// as an R^4 ODE and renormalized, accurate for the short horizons used here.
State rk4_step(const Model& m, const State& x, double dt)
{
    const int nj = m.n_joints();
    auto deriv = [&](const State& s) {
        State d = s;
        Configuration q = s.q;
        q.base_orientation.normalize();
        const Kinematics kin = forward_kinematics(m, q);
        const VecX a = continuous_acceleration(m, kin, s.v);
        d.q.base_position = s.v.base_linear;
        const Quat omega(0.0, s.v.base_angular.x(), s.v.base_angular.y(), s.v.base_angular.z());
        d.q.base_orientation = Quat(0.5 * (s.q.base_orientation * omega).coeffs());
        d.q.joint_angles = s.v.joint_rates;
        d.v = Velocity::from_flat(a);
        return d;
    };
    auto axpy = [&](const State& s, const State& d, double h) {
        State out = s;
        out.q.base_position += h * d.q.base_position;
        out.q.base_orientation.coeffs() += h * d.q.base_orientation.coeffs();
        out.q.joint_angles += h * d.q.joint_angles;
        out.v = Velocity::from_flat(VecX(s.v.flat() + h * d.v.flat()));
        return out;
    };
    const State k1 = deriv(x);
    const State k2 = deriv(axpy(x, k1, 0.5 * dt));
    const State k3 = deriv(axpy(x, k2, 0.5 * dt));
    const State k4 = deriv(axpy(x, k3, dt));
    State out = x;
    out.q.base_position +=
        dt / 6.0 *
        (k1.q.base_position + 2 * k2.q.base_position + 2 * k3.q.base_position + k4.q.base_position);
    out.q.base_orientation.coeffs() +=
        dt / 6.0 *
        (k1.q.base_orientation.coeffs() + 2 * k2.q.base_orientation.coeffs() +
         2 * k3.q.base_orientation.coeffs() + k4.q.base_orientation.coeffs());
    out.q.base_orientation.normalize();
    if (nj > 0) {
        out.q.joint_angles += dt / 6.0 *
                              (k1.q.joint_angles + 2 * k2.q.joint_angles + 2 * k3.q.joint_angles +
                               k4.q.joint_angles);
    }
    out.v = Velocity::from_flat(
        VecX(x.v.flat() + dt / 6.0 *
                              (k1.v.flat() + 2 * k2.v.flat() + 2 * k3.v.flat() + k4.v.flat())));
    return out;
}

double total_energy(const Model& m, const State& x)
{
    const Kinematics kin = forward_kinematics(m, x.q);
    double e = kinetic_energy(m, kin, x.v);
    for (int b = 0; b < m.n_bodies(); ++b) {
        const Vec3 com_w = kin.pos[b] + kin.rot[b] * m.bodies[b].inertia.com;
        e += m.bodies[b].inertia.mass * m.gravity * com_w.z();
    }
    return e;
}

Vec3 linear_momentum(const Model& m, const State& x)
{
    const Kinematics kin = forward_kinematics(m, x.q);
    const auto u = body_twists(kin, x.v);
    Vec3 p = Vec3::Zero();
    for (int b = 0; b < m.n_bodies(); ++b) {
        p += m.bodies[b].inertia.mass *
             world_com_velocity(kin, u[b], m.bodies[b].inertia.com, b);
    }
    return p;
}

Vec3 angular_momentum_world(const Model& m, const State& x)
{
    const Kinematics kin = forward_kinematics(m, x.q);
    const auto u = body_twists(kin, x.v);
    Vec3 l = Vec3::Zero();
    for (int b = 0; b < m.n_bodies(); ++b) {
        const BodyInertia& bi = m.bodies[b].inertia;
        const Mat3 i_com =
            bi.rot_inertia -
            bi.mass * (bi.com.squaredNorm() * Mat3::Identity() - bi.com * bi.com.transpose());
        const Vec3 com_w = kin.pos[b] + kin.rot[b] * bi.com;
        const Vec3 v_com = world_com_velocity(kin, u[b], bi.com, b);
        l += kin.rot[b] * (i_com * u[b].head<3>()) + com_w.cross(bi.mass * v_com);
    }
    return l;
}

}  // namespace

TEST_CASE("forward kinematics of the two link chain")
{
    Rng rng(2);
    const Model m = make_chain(rng);
    Configuration q;
    q.joint_angles = VecX::Zero(1);

    Kinematics kin = forward_kinematics(m, q);
    CHECK((kin.pos[1] - Vec3(0.1, 0, 0)).norm() < 1e-15);
    CHECK(test::max_abs_diff(kin.rot[1], Mat3::Identity()) < 1e-15);

    q.joint_angles[0] = M_PI_2;
    kin = forward_kinematics(m, q);
    CHECK((kin.pos[1] - Vec3(0.05, 0.05, 0)).norm() < 1e-12);
    CHECK((kin.rot[1] * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-12);

    // Base pose composes on the left.
    q.base_position = Vec3(1, 2, 3);
    q.base_orientation = quat_exp(Vec3(0, 0, M_PI_2));
    kin = forward_kinematics(m, q);
    CHECK((kin.pos[1] - (Vec3(1, 2, 3) + Vec3(-0.05, 0.05, 0))).norm() < 1e-12);
}

TEST_CASE("body twists match finite differences of world kinematics")
{
    Rng rng(4);
    for (Model mdl : {make_single(rng), make_chain(rng)}) {
        for (int trial = 0; trial < 10; ++trial) {
            const State x = test::random_state(rng, mdl.n_joints());
            const Kinematics kin = forward_kinematics(mdl, x.q);
            const auto u = body_twists(kin, x.v);
            const double h = 1e-6;
            const Kinematics kp = forward_kinematics(mdl, configuration_step(x.q, x.v, h));
            const Kinematics km = forward_kinematics(mdl, configuration_step(x.q, x.v, -h));
            for (int b = 0; b < mdl.n_bodies(); ++b) {
                const Vec3 com = mdl.bodies[b].inertia.com;
                const Vec3 fd_v = ((kp.pos[b] + kp.rot[b] * com) -
                                   (km.pos[b] + km.rot[b] * com)) /
                                  (2 * h);
                CHECK((fd_v - world_com_velocity(kin, u[b], com, b)).norm() < 1e-6);

                const Mat3 omega_hat = (kp.rot[b] - km.rot[b]) / (2 * h) * kin.rot[b].transpose();
                const Vec3 fd_w(omega_hat(2, 1), omega_hat(0, 2), omega_hat(1, 0));
                CHECK((fd_w - kin.rot[b] * u[b].head<3>()).norm() < 1e-6);
            }
        }
    }
}

TEST_CASE("mass matrix structure and kinetic energy")
{
    Rng rng(6);
    const Model single = make_single(rng);
    const State xs = test::random_state(rng, 0);
    const Kinematics ks = forward_kinematics(single, xs.q);
    const MatX ms = mass_matrix(single, ks);

    // Mixed frame single body blocks: angular about origin, h coupling, m I.
    const BodyInertia& bi = single.bodies[0].inertia;
    const Mat3 r = ks.rot[0];
    CHECK(test::max_abs_diff(ms.topLeftCorner<3, 3>(), bi.rot_inertia) < 1e-14);
    CHECK(test::max_abs_diff(ms.topRightCorner<3, 3>(),
                             skew(Vec3(bi.mass * bi.com)) * r.transpose()) < 1e-14);
    CHECK(test::max_abs_diff(ms.bottomRightCorner<3, 3>(), bi.mass * Mat3::Identity()) < 1e-14);

    for (Model mdl : {make_single(rng), make_chain(rng)}) {
        for (int trial = 0; trial < 10; ++trial) {
            const State x = test::random_state(rng, mdl.n_joints());
            const Kinematics kin = forward_kinematics(mdl, x.q);
            const MatX mm = mass_matrix(mdl, kin);
            CHECK(test::max_abs_diff(mm, mm.transpose()) < 1e-13);
            CHECK(Eigen::SelfAdjointEigenSolver<MatX>(mm).eigenvalues().minCoeff() > 0.0);
            // World linear rows sum the body masses.
            CHECK(test::max_abs_diff(mm.block<3, 3>(3, 3),
                                     mdl.body_mass_sum() * Mat3::Identity()) < 1e-13);

            // Independent kinetic energy from per-body com quantities.
            const auto u = body_twists(kin, x.v);
            double t_ref = 0.0;
            for (int b = 0; b < mdl.n_bodies(); ++b) {
                const BodyInertia& ib = mdl.bodies[b].inertia;
                const Mat3 i_com = ib.rot_inertia -
                                   ib.mass * (ib.com.squaredNorm() * Mat3::Identity() -
                                              ib.com * ib.com.transpose());
                const Vec3 v_com = world_com_velocity(kin, u[b], ib.com, b);
                t_ref += 0.5 * ib.mass * v_com.squaredNorm() +
                         0.5 * u[b].head<3>().dot(i_com * u[b].head<3>());
            }
            CHECK(kinetic_energy(mdl, kin, x.v) == Approx(t_ref).epsilon(1e-10));
        }
    }
}

TEST_CASE("inverse dynamics is linear in the inertial parameters")
{
    Rng rng(8);
    for (Model mdl : {make_single(rng), make_chain(rng)}) {
        const Vec3 g(0, 0, -9.81);
        for (int trial = 0; trial < 20; ++trial) {
            const State x = test::random_state(rng, mdl.n_joints());
            const Kinematics kin = forward_kinematics(mdl, x.q);
            VecX a = VecX::Zero(mdl.n_vel());
            for (int i = 0; i < a.size(); ++i) a[i] = rng.uniform(-5, 5);

            const VecX id = inverse_dynamics(mdl, kin, x.v, a, g);
            const MatX y = id_pi_regressor(mdl, kin, x.v, a, g);
            CHECK((id - y * stacked_pi(mdl)).norm() < 1e-11 * std::max(1.0, id.norm()));

            // Definition check against the pieces.
            const VecX parts = mass_matrix(mdl, kin) * a + bias_force(mdl, kin, x.v) +
                               inverse_dynamics(mdl, kin, x.v, VecX::Zero(mdl.n_vel()), g) -
                               bias_force(mdl, kin, x.v);
            CHECK((id - parts).norm() < 1e-10 * std::max(1.0, id.norm()));
        }
    }
}

TEST_CASE("gravity force matches inverse dynamics at rest")
{
    Rng rng(10);
    for (Model mdl : {make_single(rng), make_chain(rng)}) {
        const State x = test::random_state(rng, mdl.n_joints());
        const Kinematics kin = forward_kinematics(mdl, x.q);
        Velocity zero;
        zero.joint_rates = VecX::Zero(mdl.n_joints());
        const VecX tau_g = gravity_force(mdl, kin);
        const VecX id = inverse_dynamics(mdl, kin, zero, VecX::Zero(mdl.n_vel()),
                                         Vec3(0, 0, -mdl.gravity));
        CHECK((tau_g + id).norm() < 1e-12);
        // World z component carries the full weight.
        CHECK(tau_g[5] == Approx(-mdl.body_mass_sum() * mdl.gravity));
    }
}

TEST_CASE("free body with centered mass follows Euler's equations")
{
    Rng rng(12);
    BodyInertia bi;
    bi.mass = 0.5;
    bi.rot_inertia = Vec3(0.002, 0.003, 0.004).asDiagonal();
    const Model mdl = test::single_body_model(bi);
    const State x = test::random_state(rng, 0, 6.0);
    const Kinematics kin = forward_kinematics(mdl, x.q);
    const VecX a = continuous_acceleration(mdl, kin, x.v);

    const Vec3 w = x.v.base_angular;
    const Vec3 euler = -bi.rot_inertia.inverse() * (w.cross(bi.rot_inertia * w));
    CHECK((Vec3(a.head<3>()) - euler).norm() < 1e-10);
    CHECK((Vec3(a.segment<3>(3)) - Vec3(0, 0, -mdl.gravity)).norm() < 1e-10);
}

TEST_CASE("conservative rollouts preserve energy and momentum")
{
    Rng rng(14);
    const double dt = 5e-4;
    const int steps = 600;

    for (Model mdl : {make_single(rng), make_chain(rng)}) {
        State x = test::random_state(rng, mdl.n_joints(), 5.0);
        const double e0 = total_energy(mdl, x);
        const Vec3 p0 = linear_momentum(mdl, x);
        State xt = x;
        for (int i = 0; i < steps; ++i) xt = rk4_step(mdl, xt, dt);

        CHECK(std::abs(total_energy(mdl, xt) - e0) < 1e-8);
        const Vec3 impulse = mdl.body_mass_sum() * Vec3(0, 0, -mdl.gravity) * (steps * dt);
        CHECK((linear_momentum(mdl, xt) - p0 - impulse).norm() < 1e-8);
    }

    // Without gravity world angular momentum is conserved as well.
    Model free = make_chain(rng);
    free.gravity = 0.0;
    State x = test::random_state(rng, free.n_joints(), 5.0);
    const Vec3 l0 = angular_momentum_world(free, x);
    const double e0 = total_energy(free, x);
    for (int i = 0; i < steps; ++i) x = rk4_step(free, x, dt);
    CHECK((angular_momentum_world(free, x) - l0).norm() < 1e-8);
    CHECK(std::abs(total_energy(free, x) - e0) < 1e-8);
}

TEST_CASE("external wrenches superpose like extra gravity")
{
    Rng rng(16);
    const Model mdl = make_chain(rng);
    const State x = test::random_state(rng, mdl.n_joints());
    const Kinematics kin = forward_kinematics(mdl, x.q);

    const Vec3 extra(0.7, -0.2, 0.4);
    std::vector<Vec6> wrench(mdl.n_bodies());
    for (int b = 0; b < mdl.n_bodies(); ++b) {
        wrench[b] = spatial::uniform_field_wrench(mdl.bodies[b].inertia, kin.rot[b], extra);
    }
    const VecX a_ext = continuous_acceleration(mdl, kin, x.v, &wrench);

    // The produced acceleration must satisfy inverse dynamics with the
    // wrench applied, and equal plain gravity with the shifted field.
    const VecX id = inverse_dynamics(mdl, kin, x.v, a_ext, Vec3(0, 0, -mdl.gravity), &wrench);
    CHECK(id.norm() < 1e-9);
    const VecX id_shifted =
        inverse_dynamics(mdl, kin, x.v, a_ext, Vec3(0, 0, -mdl.gravity) + extra);
    CHECK(id_shifted.norm() < 1e-9);
}

TEST_CASE("residual acceleration is additive")
{
    Rng rng(18);
    const Model mdl = make_single(rng);
    const State x = test::random_state(rng, 0);
    const Kinematics kin = forward_kinematics(mdl, x.q);
    VecX res = VecX::Zero(6);
    res << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6;
    const VecX base = continuous_acceleration(mdl, kin, x.v);
    const VecX with = continuous_acceleration(mdl, kin, x.v, nullptr, &res);
    CHECK((with - base - res).norm() < 1e-14);
}

TEST_CASE("configuration step integrates each coordinate")
{
    Configuration q;
    q.joint_angles = VecX::Zero(1);
    Velocity v;
    v.base_angular = Vec3(0, 0, 1.0);
    v.base_linear = Vec3(1, 2, 3);
    v.joint_rates = VecX::Ones(1);

    const Configuration q1 = configuration_step(q, v, 0.5);
    CHECK((q1.base_position - Vec3(0.5, 1.0, 1.5)).norm() < 1e-15);
    CHECK(q1.joint_angles[0] == Approx(0.5));
    CHECK(quat_angle(q1.base_orientation, quat_exp(Vec3(0, 0, 0.5))) < 1e-12);
    CHECK(q1.base_orientation.norm() == Approx(1.0).epsilon(1e-12));

    // Stepping forward then backward returns to the start.
    const Configuration q2 = configuration_step(q1, v, -0.5);
    CHECK((q2.base_position - q.base_position).norm() < 1e-14);
    CHECK(quat_angle(q2.base_orientation, q.base_orientation) < 1e-12);
}
