#pragma once

// Reference time stepper: semi-implicit velocity update with impulses from a
// cone-constrained QP (Anitescu-style linearized complementarity with
// Baumgarte penetration correction), then an explicit configuration step.

#include "cisid/cone_qp.hpp"
#include "cisid/contact.hpp"
#include "cisid/math.hpp"
#include "cisid/model.hpp"
#include "cisid/multibody.hpp"

#include <functional>
#include <vector>

namespace cisid {

// Swirling external field: acceleration at world point p is
//   a(p) = -k_r * r + k_s * (d x r),  r = radial offset from the axis,
// optionally decayed by exp(-|axial offset| / decay_length).
struct VortexParams {
    Vec3 axis_point = Vec3::Zero();
    Vec3 axis_direction = Vec3::UnitZ();
    double radial_gain = 5.0;
    double swirl_gain = 3.0;
    double decay_length = 0.0;  // <= 0 disables axial decay
};

inline Vec3 vortex_acceleration(const Vec3& p, const VortexParams& vp)
{
    const Vec3 d = vp.axis_direction.normalized();
    const Vec3 rel = p - vp.axis_point;
    const double axial = rel.dot(d);
    const Vec3 radial = rel - axial * d;
    Vec3 a = -vp.radial_gain * radial + vp.swirl_gain * d.cross(radial);
    if (vp.decay_length > 0.0) a *= std::exp(-std::abs(axial) / vp.decay_length);
    return a;
}

// Per-body wrenches (body coordinates) from a position-dependent field,
// evaluated at each body's center of mass and applied there.
inline std::vector<Vec6> field_wrenches(const Model& m, const Kinematics& kin,
                                        const VortexParams& vp)
{
    std::vector<Vec6> w(m.n_bodies());
    for (int b = 0; b < m.n_bodies(); ++b) {
        const Vec3 com_w = kin.pos[b] + kin.rot[b] * m.bodies[b].inertia.com;
        w[b] = spatial::uniform_field_wrench(m.bodies[b].inertia, kin.rot[b],
                                             vortex_acceleration(com_w, vp));
    }
    return w;
}

struct StepperConfig {
    double regularization = 1e-10;  // added to the Delassus diagonal
    double stabilization = 0.1;     // fraction of penetration removed per step
    // The linearized constraint lets impacts overshoot the surface through two
    // channels: within-step rotation curvature (O(|w|^2 dt^2)) and the
    // friction coupling term, which relaxes the normal constraint by
    // mu |v_t| dt while sliding. Each correction pass measures the actual
    // next-step penetration, folds it into the constraint offset, and
    // re-solves (warm started); the offset only ever tightens. Resting and
    // flat-drop behavior is untouched.
    int gap_correction_passes = 2;
    // Coplanar contact clusters make the Delassus operator rank deficient, so
    // the accelerated solver's tail is sublinear; the tolerance is set where
    // the physically meaningful (range-space) impulse error is far below it.
    ConeQpConfig qp{1e-9, 200000};
};

struct StepResult {
    State state;
    ContactImpulse lambda;
    int qp_iterations = 0;
    bool qp_converged = true;
};

using ResidualAccel = std::function<VecX(const State&)>;

inline StepResult anitescu_step(const Model& m, const State& x, double dt,
                                const StepperConfig& cfg = {},
                                const VortexParams* vortex = nullptr,
                                const ResidualAccel* residual = nullptr,
                                const ContactImpulse* warm = nullptr)
{
    const Kinematics kin = forward_kinematics(m, x.q);
    const ContactSet cs = contact_set(m, model_polytopes(m), kin);

    std::vector<Vec6> ext;
    if (vortex) ext = field_wrenches(m, kin, *vortex);

    VecX accel = continuous_acceleration(m, kin, x.v, vortex ? &ext : nullptr);
    if (residual) accel += (*residual)(x);
    const VecX v_free = x.v.flat() + dt * accel;

    const int p = cs.n_contacts();
    const VecX jv = cs.jac * v_free;
    const Eigen::LDLT<MatX> mass_ldlt(mass_matrix(m, kin));
    const DelassusQp dq{cs.jac, mass_ldlt, 1.0, cfg.regularization};

    StepResult out;
    out.qp_converged = true;
    VecX gap_err = VecX::Zero(p);
    ContactImpulse pass_warm = warm ? *warm : ContactImpulse{};
    const int passes = p > 0 ? cfg.gap_correction_passes : 0;
    for (int pass = 0;; ++pass) {
        VecX c(3 * p);
        for (int i = 0; i < p; ++i) {
            const double phi = cs.phi[i];
            const double slide = jv.segment<2>(3 * i + 1).norm();
            // The correction enters at full strength: it anticipates new
            // penetration rather than recovering existing penetration, so the
            // stabilization damping does not apply to it.
            c[3 * i] = jv[3 * i] + std::max(0.0, phi) / dt +
                       cfg.stabilization * std::min(0.0, phi) / dt + gap_err[i] / dt +
                       m.friction * slide;
            c.segment<2>(3 * i + 1) = jv.segment<2>(3 * i + 1);
        }
        const ConeQpResult qp = solve_delassus_qp(
            dq, c, m.friction, cfg.qp, pass_warm.data.size() ? &pass_warm : nullptr);
        out.lambda = qp.lambda;
        out.qp_iterations += qp.iterations;
        out.qp_converged = out.qp_converged && qp.converged;

        const VecX v_next = v_free + mass_ldlt.solve(cs.jac.transpose() * qp.lambda.data);
        out.state.v = Velocity::from_flat(v_next);
        out.state.q = configuration_step(x.q, out.state.v, dt);
        if (pass >= passes) break;

        const Kinematics kin_next = forward_kinematics(m, out.state.q);
        for (int i = 0; i < p; ++i) {
            const int b = cs.body[i];
            const double actual = (kin_next.pos[b] + kin_next.rot[b] * cs.vertex[i]).z();
            // Pre-existing penetration recovers on the stabilization schedule;
            // only the violation beyond that is corrected.
            const double target = (1.0 - cfg.stabilization) * std::min(0.0, cs.phi[i]);
            gap_err[i] += std::min(0.0, actual - target);
        }
        pass_warm = qp.lambda;
    }
    return out;
}

struct Trajectory {
    std::vector<State> states;  // steps + 1 entries
    double dt = 0.0;
    int contact_events = 0;  // steps where some impulse was nonzero

    int n_steps() const { return static_cast<int>(states.size()) - 1; }
};

inline Trajectory rollout(const Model& m, const State& x0, int steps, double dt,
                          const StepperConfig& cfg = {},
                          const VortexParams* vortex = nullptr,
                          const ResidualAccel* residual = nullptr)
{
    Trajectory traj;
    traj.dt = dt;
    traj.states.reserve(steps + 1);
    traj.states.push_back(x0);
    ContactImpulse warm;
    for (int k = 0; k < steps; ++k) {
        const StepResult r =
            anitescu_step(m, traj.states.back(), dt, cfg, vortex, residual,
                          warm.data.size() ? &warm : nullptr);
        if (r.lambda.data.lpNorm<Eigen::Infinity>() > 0.0) ++traj.contact_events;
        warm = r.lambda;
        traj.states.push_back(r.state);
    }
    return traj;
}

}  // namespace cisid
