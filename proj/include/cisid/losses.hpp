#pragma once

// Violation-based implicit loss and its exact gradient, plus the simulation
// (prediction) loss used by the baselines.
//
// The violation loss for one transition (x_k -> x_{k+1}) is
//   L = min_{lambda in K} w_pred ||M dv + J' lambda||^2_{M^-1} + sum_i h_i
// with dv the gap between the observed velocity change and the continuous
// dynamics (including the learned residual), J the contact Jacobian at q_k,
// gaps evaluated at q_{k+1}, and per-contact penalty terms
//   h_comp = w_comp * lambda_n * phi(k+1)
//   h_diss = w_diss * lambda' [mu ||g||; g],  g = J_t(k) v(k+1)
//   h_pen  = w_pen * min(0, phi(k+1))^2.
// The minimizer is a cone QP; gradients follow from the envelope theorem at
// the optimal impulse, with the tangential impulse reparameterized as
// lambda_t = mu lambda_n beta (||beta|| <= 1) so the feasible set does not
// depend on mu.

#include "cisid/cone_qp.hpp"
#include "cisid/contact.hpp"
#include "cisid/multibody.hpp"
#include "cisid/nets.hpp"
#include "cisid/params.hpp"
#include "cisid/simulator.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace cisid {

struct LossWeights {
    double w_comp = 1e-3;
    double w_diss = 0.1;
    double w_pen = 100.0;
    double w_pred = 1.0;
    double w_res = 0.0;    // residual output-norm coefficient
    double w_res_w = 0.0;  // network weight-norm coefficient
    double rotation_weight = 1.0;
};

// Everything about one transition that does not depend on the learnable
// parameters: kinematics at both endpoints and the inverse-dynamics regressor
// of the force mismatch at (q_k, v_k) under the believed gravity.
struct SampleCache {
    Kinematics kin;                  // at q_k
    std::vector<Mat3> rot_next;      // body rotations at q_{k+1}
    std::vector<Vec3> pos_next;      // body positions at q_{k+1}
    std::vector<Vec6> twist_next;    // W_b(q_k) v_{k+1} per body
    VecX v_k, v_k1;
    MatX regressor;                  // nv x 10 nb; f = -regressor * pi_stacked
};

inline SampleCache make_sample_cache(const Model& skeleton, const TransitionSample& s)
{
    SampleCache c;
    c.kin = forward_kinematics(skeleton, s.x_k.q);
    const Kinematics kin_next = forward_kinematics(skeleton, s.x_k1.q);
    c.rot_next = kin_next.rot;
    c.pos_next = kin_next.pos;
    c.twist_next = body_twists(c.kin, s.x_k1.v);
    c.v_k = s.x_k.v.flat();
    c.v_k1 = s.x_k1.v.flat();
    c.regressor = id_pi_regressor(skeleton, c.kin, s.x_k.v, VecX::Zero(skeleton.n_vel()),
                                  Vec3(0, 0, -skeleton.gravity));
    return c;
}

// a' G(pi) c as a linear functional of pi (pi = [m, h, Ixx, Iyy, Izz, Ixy,
// Ixz, Iyz], G the body-frame spatial inertia). Symmetric in (a, c).
inline Pi10 inertia_pi_contraction(const Vec6& a, const Vec6& c)
{
    const Vec3 aw = a.head<3>(), av = a.tail<3>();
    const Vec3 cw = c.head<3>(), cv = c.tail<3>();
    Pi10 q;
    q[0] = av.dot(cv);
    q.segment<3>(1) = cv.cross(aw) + av.cross(cw);
    q[4] = aw.x() * cw.x();
    q[5] = aw.y() * cw.y();
    q[6] = aw.z() * cw.z();
    q[7] = aw.x() * cw.y() + aw.y() * cw.x();
    q[8] = aw.x() * cw.z() + aw.z() * cw.x();
    q[9] = aw.y() * cw.z() + aw.z() * cw.y();
    return q;
}

namespace detail {

// Parameter-dependent pieces of one violation evaluation.
struct ViolationParts {
    Model model;  // materialized parameters
    ContactSet contacts;
    VecX phi_next;
    MatX mass;
    Eigen::LDLT<MatX> mass_ldlt;
    VecX f;        // generalized force mismatch at zero acceleration
    VecX delta;    // residual acceleration (zero without a net)
    Mlp::Tape tape;
    VecX w;        // v_k - v_{k+1} + delta dt
    VecX r0, u0;   // r0 = M w + f dt, u0 = M^-1 r0
    VecX g_t;      // 2 per contact: J_t(k) v_{k+1}
    VecX c;        // QP linear term, triple layout
    double constant = 0.0;
};

inline ViolationParts build_violation_parts(const TransitionSample& s, const Model& skeleton,
                                            const StructuredParams& params, const Mlp* net,
                                            const LossWeights& w, const SampleCache& cache)
{
    ViolationParts parts;
    parts.model = apply_params(skeleton, params);
    const Model& m = parts.model;
    const double dt = s.dt;

    parts.contacts = contact_set(m, model_polytopes(m), cache.kin);
    const int p = parts.contacts.n_contacts();

    parts.phi_next.resize(p);
    for (int i = 0; i < p; ++i) {
        const int b = parts.contacts.body[i];
        parts.phi_next[i] =
            (cache.pos_next[b] + cache.rot_next[b] * parts.contacts.vertex[i]).z();
    }

    parts.mass = mass_matrix(m, cache.kin);
    parts.mass_ldlt.compute(parts.mass);
    parts.f = -(cache.regressor * stacked_pi(m));

    const int nv = m.n_vel();
    parts.delta = VecX::Zero(nv);
    if (net != nullptr) parts.delta = net->forward(quat_feature(s.x_k), &parts.tape);

    parts.w = cache.v_k - cache.v_k1 + dt * parts.delta;
    parts.r0 = parts.mass * parts.w + dt * parts.f;
    parts.u0 = parts.mass_ldlt.solve(parts.r0);

    parts.g_t.resize(2 * p);
    parts.c.resize(3 * p);
    const VecX ju0 = parts.contacts.jac * parts.u0;
    parts.constant = w.w_pred * parts.r0.dot(parts.u0);
    for (int i = 0; i < p; ++i) {
        const Vec2 g = parts.contacts.jac.middleRows<2>(3 * i + 1) * cache.v_k1;
        parts.g_t.segment<2>(2 * i) = g;
        parts.c[3 * i] = 2.0 * w.w_pred * ju0[3 * i] + w.w_comp * parts.phi_next[i] +
                         w.w_diss * m.friction * g.norm();
        parts.c.segment<2>(3 * i + 1) =
            2.0 * w.w_pred * ju0.segment<2>(3 * i + 1) + w.w_diss * g;
        const double pen = std::min(0.0, parts.phi_next[i]);
        parts.constant += w.w_pen * pen * pen;
    }
    return parts;
}

}  // namespace detail

struct InnerConfig {
    ConeQpConfig qp{1e-8, 5000};
};

using InnerSolution = ConeQpResult;

// Optimal impulse of the violation inner problem.
inline InnerSolution solve_inner(const TransitionSample& s, const Model& skeleton,
                                 const StructuredParams& params, const Mlp* net,
                                 const LossWeights& w, const InnerConfig& cfg = {},
                                 const SampleCache* cache = nullptr,
                                 const ContactImpulse* warm = nullptr)
{
    std::optional<SampleCache> local;
    if (cache == nullptr) local.emplace(make_sample_cache(skeleton, s));
    const SampleCache& cc = cache ? *cache : *local;
    const detail::ViolationParts parts =
        detail::build_violation_parts(s, skeleton, params, net, w, cc);
    const DelassusQp dq{parts.contacts.jac, parts.mass_ldlt, 2.0 * w.w_pred, 0.0};
    return solve_delassus_qp(dq, parts.c, parts.model.friction, cfg.qp, warm);
}

inline double violation_loss(const TransitionSample& s, const Model& skeleton,
                             const StructuredParams& params, const Mlp* net,
                             const LossWeights& w, const InnerConfig& cfg = {},
                             const SampleCache* cache = nullptr,
                             const ContactImpulse* warm = nullptr)
{
    std::optional<SampleCache> local;
    if (cache == nullptr) local.emplace(make_sample_cache(skeleton, s));
    const SampleCache& cc = cache ? *cache : *local;
    const detail::ViolationParts parts =
        detail::build_violation_parts(s, skeleton, params, net, w, cc);
    const DelassusQp dq{parts.contacts.jac, parts.mass_ldlt, 2.0 * w.w_pred, 0.0};
    const ConeQpResult qp =
        solve_delassus_qp(dq, parts.c, parts.model.friction, cfg.qp, warm);
    return qp.objective + parts.constant;
}

struct ViolationGradient {
    double loss = 0.0;  // includes regularizers when requested
    StructuredParams structured;
    VecX net;  // empty without a net
    InnerSolution inner;
};

// Envelope-theorem gradient at the optimal impulse. When with_regularizers is
// set (training), the residual output-norm and weight-norm terms are added to
// both the loss and the network gradient.
inline ViolationGradient violation_gradient(const TransitionSample& s, const Model& skeleton,
                                            const StructuredParams& params, const Mlp* net,
                                            const LossWeights& w, const InnerConfig& cfg = {},
                                            const SampleCache* cache = nullptr,
                                            const ContactImpulse* warm = nullptr,
                                            bool with_regularizers = false)
{
    std::optional<SampleCache> local;
    if (cache == nullptr) local.emplace(make_sample_cache(skeleton, s));
    const SampleCache& cc = cache ? *cache : *local;
    const detail::ViolationParts parts =
        detail::build_violation_parts(s, skeleton, params, net, w, cc);
    const Model& m = parts.model;
    const double dt = s.dt;
    const double mu = m.friction;
    const int p = parts.contacts.n_contacts();
    const int nb = m.n_bodies();

    ViolationGradient out;
    out.structured = StructuredParams::zeros_like(params);

    const DelassusQp dq{parts.contacts.jac, parts.mass_ldlt, 2.0 * w.w_pred, 0.0};
    out.inner = solve_delassus_qp(dq, parts.c, mu, cfg.qp, warm);
    const ContactImpulse& lambda = out.inner.lambda;
    out.loss = out.inner.objective + parts.constant;

    const VecX jt_lambda = parts.contacts.jac.transpose() * lambda.data;
    const VecX r = parts.r0 + jt_lambda;
    const VecX u = parts.u0 + parts.mass_ldlt.solve(jt_lambda);

    // Inertia coordinates: M and f are linear in the scaled per-body vectors.
    const std::vector<Vec6> u_body = [&] {
        std::vector<Vec6> v(nb);
        for (int b = 0; b < nb; ++b) v[b] = cc.kin.body_jac[b] * u;
        return v;
    }();
    const VecX yt_u = cc.regressor.transpose() * u;
    std::vector<Pi10> grad_pi(nb);
    for (int b = 0; b < nb; ++b) {
        const Vec6 wb = cc.kin.body_jac[b] * parts.w;
        grad_pi[b] = w.w_pred * (2.0 * inertia_pi_contraction(wb, u_body[b]) -
                                 inertia_pi_contraction(u_body[b], u_body[b]));
        grad_pi[b] -= 2.0 * w.w_pred * dt * yt_u.segment<10>(10 * b);
    }
    out.structured.thetas = chain_pi_gradient(params, skeleton.total_mass, grad_pi);

    // Vertices and friction. Contacts are body-major in vertex order, so the
    // vertex ordinal within its body is the contact index minus the body's
    // first contact index.
    const VecX ju = parts.contacts.jac * u;
    double grad_mu = 0.0;
    int body_start = 0, current_body = 0;
    for (int i = 0; i < p; ++i) {
        const int b = parts.contacts.body[i];
        if (b != current_body) {
            current_body = b;
            body_start = i;
        }
        const Vec3 lam = lambda.triple(i);
        const Vec2 lam_t(lam[1], lam[2]);
        const Vec3 f_world(lam[1], lam[2], lam[0]);
        const Vec2 g = parts.g_t.segment<2>(2 * i);
        const double gn = g.norm();
        const Vec3 row_z_next = cc.rot_next[b].row(2);

        Vec3 gv = Vec3::Zero();
        // Prediction term through J' lambda.
        gv += 2.0 * w.w_pred *
              (cc.kin.rot[b].transpose() * f_world).cross(u_body[b].head<3>());
        // Gap terms at q_{k+1}.
        gv += w.w_comp * lam[0] * row_z_next;
        gv += 2.0 * w.w_pen * std::min(0.0, parts.phi_next[i]) * row_z_next;
        // Dissipation through the sliding velocity g (norm subgradient 0 at 0).
        Vec2 dh_dg = w.w_diss * lam_t;
        if (gn > 0.0) dh_dg += w.w_diss * mu * lam[0] / gn * g;
        const Mat3 dskew = cc.kin.rot[b] * skew(cc.twist_next[b].head<3>());
        gv += dskew.topRows<2>().transpose() * dh_dg;

        out.structured.vertices[b][i - body_start] = gv;

        // Friction: explicit h_diss term plus the cone reparameterization
        // (lambda_t = mu lambda_n beta, so d lambda_t / d mu = lambda_t / mu).
        grad_mu += w.w_diss * lam[0] * gn;
        if (mu > 1e-12) {
            const Vec2 dlam_t = lam_t / mu;
            grad_mu += w.w_diss * dlam_t.dot(g);
            grad_mu += 2.0 * w.w_pred * dlam_t.dot(ju.segment<2>(3 * i + 1));
        }
    }
    out.structured.mu = grad_mu;

    if (net != nullptr) {
        out.net = VecX::Zero(net->n_params());
        VecX upstream = 2.0 * w.w_pred * dt * r;
        if (with_regularizers) {
            out.loss += w.w_res * parts.delta.squaredNorm() + w.w_res_w * net->weight_norm_sq();
            upstream += 2.0 * w.w_res * parts.delta;
        }
        net->backward(parts.tape, upstream, out.net);
        if (with_regularizers) net->add_weight_norm_gradient(w.w_res_w, out.net);
    }
    return out;
}

// Squared one-step state error: position, weighted squared geodesic angle,
// joint angles, and generalized velocity in natural units.
inline double state_error(const State& predicted, const State& observed, double rotation_weight)
{
    const double angle = quat_angle(predicted.q.base_orientation, observed.q.base_orientation);
    return (predicted.q.base_position - observed.q.base_position).squaredNorm() +
           rotation_weight * angle * angle +
           (predicted.q.joint_angles - observed.q.joint_angles).squaredNorm() +
           (predicted.v.flat() - observed.v.flat()).squaredNorm();
}

// One-step simulation loss: run the reference stepper from x_k and compare
// with the observed x_{k+1}.
inline double prediction_loss(const TransitionSample& s, const Model& m, const LossWeights& w,
                              const StepperConfig& cfg = {},
                              const ContactImpulse* warm = nullptr,
                              ContactImpulse* lambda_out = nullptr)
{
    const StepResult r = anitescu_step(m, s.x_k, s.dt, cfg, nullptr, nullptr, warm);
    if (lambda_out != nullptr) *lambda_out = r.lambda;
    return state_error(r.state, s.x_k1, w.rotation_weight);
}

struct FdConfig {
    double step = 1e-6;   // relative step, floored at |x| = 1
    int max_params = 64;  // guard against accidentally huge sweeps
};

struct PredictionGradient {
    double loss = 0.0;  // batch mean at the center point
    StructuredParams structured;
};

// Central finite differences of the batch-mean simulation loss over the
// flattened structured parameters. Each sample's center-point impulse warm
// starts its probe solves.
inline PredictionGradient prediction_gradient_fd(const std::vector<TransitionSample>& batch,
                                                 const Model& skeleton,
                                                 const StructuredParams& params,
                                                 const LossWeights& w,
                                                 const StepperConfig& step_cfg = {},
                                                 const FdConfig& fd = {})
{
    if (params.size() > fd.max_params) {
        throw std::invalid_argument("prediction_gradient_fd: parameter count " +
                                    std::to_string(params.size()) + " exceeds cap " +
                                    std::to_string(fd.max_params));
    }
    if (batch.empty()) throw std::invalid_argument("prediction_gradient_fd: empty batch");

    PredictionGradient out;
    out.structured = StructuredParams::zeros_like(params);

    std::vector<ContactImpulse> warm(batch.size());
    {
        const Model center = apply_params(skeleton, params);
        double total = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i)
            total += prediction_loss(batch[i], center, w, step_cfg, nullptr, &warm[i]);
        out.loss = total / static_cast<double>(batch.size());
    }

    const VecX flat = params.flatten();
    VecX grad(flat.size());
    StructuredParams probe = params;
    const auto batch_loss = [&](const VecX& x) {
        probe.set_flat(x);
        const Model m = apply_params(skeleton, probe);
        double total = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i)
            total += prediction_loss(batch[i], m, w, step_cfg, &warm[i]);
        return total / static_cast<double>(batch.size());
    };
    for (int j = 0; j < flat.size(); ++j) {
        const double h = fd.step * std::max(1.0, std::abs(flat[j]));
        VecX x = flat;
        x[j] = flat[j] + h;
        const double up = batch_loss(x);
        x[j] = flat[j] - h;
        const double down = batch_loss(x);
        grad[j] = (up - down) / (2.0 * h);
    }
    out.structured.set_flat(grad);
    return out;
}

struct E2eGradient {
    double loss = 0.0;
    VecX net;
};

// Direct next-velocity regression: the network predicts v(k+1) from the state
// embedding; the configuration advances through the standard update and the
// same state error is scored. Backprop goes through the configuration step.
inline double e2e_prediction_loss(const TransitionSample& s, const Mlp& net,
                                  bool rotation_feature, const LossWeights& w,
                                  E2eGradient* grad = nullptr)
{
    const VecX feat = rotation_feature ? quat_feature(s.x_k) : raw_feature(s.x_k);
    Mlp::Tape tape;
    const VecX v_next = net.forward(feat, grad ? &tape : nullptr);

    State pred;
    pred.v = Velocity::from_flat(v_next);
    pred.q = configuration_step(s.x_k.q, pred.v, s.dt);
    const double loss = state_error(pred, s.x_k1, w.rotation_weight);

    if (grad != nullptr) {
        const int nj = s.x_k.q.n_joints();
        VecX up = VecX::Zero(6 + nj);
        // Velocity part.
        up += 2.0 * (v_next - s.x_k1.v.flat());
        // Position and joint parts enter linearly with slope dt.
        up.segment<3>(3) +=
            2.0 * s.dt * (pred.q.base_position - s.x_k1.q.base_position);
        up.tail(nj) += 2.0 * s.dt * (pred.q.joint_angles - s.x_k1.q.joint_angles);
        // Rotation: e(u) = Log(B Exp(u)), u = dt * omega,
        // d||e||^2/du = 2 Jr(u)' Jr(e)^-T e.
        const Vec3 u_vec = s.dt * v_next.head<3>();
        const Quat b_rel = s.x_k1.q.base_orientation.conjugate() * s.x_k.q.base_orientation;
        const Vec3 e = quat_log(b_rel * quat_exp(u_vec));
        const Vec3 de = so3_right_jacobian(u_vec).transpose() *
                        (so3_right_jacobian_inv(e).transpose() * e);
        up.head<3>() += 2.0 * w.rotation_weight * s.dt * de;

        grad->loss = loss;
        grad->net = VecX::Zero(net.n_params());
        net.backward(tape, up, grad->net);
    }
    return loss;
}

}  // namespace cisid
