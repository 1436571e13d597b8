#pragma once

// Contact candidates against the ground plane z = 0: one candidate per
// polytope vertex, signed distance = world height, contact frame =
// (world z normal, world x/y tangents). Impulses live in per-contact
// triples (normal, tangent_x, tangent_y) constrained to the Coulomb cone
// ||lambda_t|| <= mu * lambda_n.

#include "cisid/math.hpp"
#include "cisid/model.hpp"
#include "cisid/multibody.hpp"

#include <stdexcept>
#include <vector>

namespace cisid {

struct ContactImpulse {
    // Flat per-contact triples [n, tx, ty] * p.
    VecX data;

    static ContactImpulse zero(int n_contacts)
    {
        ContactImpulse c;
        c.data = VecX::Zero(3 * n_contacts);
        return c;
    }

    int n_contacts() const { return static_cast<int>(data.size() / 3); }
    double normal(int i) const { return data[3 * i]; }
    Vec2 tangential(int i) const { return data.segment<2>(3 * i + 1); }
    Eigen::VectorBlock<VecX, 3> triple(int i) { return data.segment<3>(3 * i); }
    Vec3 triple(int i) const { return data.segment<3>(3 * i); }

    // Rows grouped [all normals; tangent pairs], matching contact_jacobian.
    VecX stacked() const
    {
        const int p = n_contacts();
        VecX out(3 * p);
        for (int i = 0; i < p; ++i) {
            out[i] = data[3 * i];
            out.segment<2>(p + 2 * i) = data.segment<2>(3 * i + 1);
        }
        return out;
    }

    static ContactImpulse from_stacked(const VecX& s)
    {
        const int p = static_cast<int>(s.size() / 3);
        ContactImpulse c = zero(p);
        for (int i = 0; i < p; ++i) {
            c.data[3 * i] = s[i];
            c.data.segment<2>(3 * i + 1) = s.segment<2>(p + 2 * i);
        }
        return c;
    }
};

// Closed-form Euclidean projection onto the second-order cone
// ||t|| <= mu * n, applied per contact. Total for every mu >= 0.
inline ContactImpulse project_to_cone(const ContactImpulse& lambda, double mu)
{
    ContactImpulse out = lambda;
    for (int i = 0; i < lambda.n_contacts(); ++i) {
        const double n = lambda.normal(i);
        const Vec2 t = lambda.tangential(i);
        const double tn = t.norm();
        if (tn <= mu * n) continue;       // inside (covers mu = 0, t = 0, n >= 0)
        if (mu * tn <= -n) {              // inside the polar cone: project to apex
            out.triple(i).setZero();
            continue;
        }
        const double pn = (n + mu * tn) / (1.0 + mu * mu);
        out.data[3 * i] = pn;
        out.data.segment<2>(3 * i + 1) = (mu * pn / tn) * t;
    }
    return out;
}

inline bool cone_membership(const ContactImpulse& lambda, double mu, double tol)
{
    for (int i = 0; i < lambda.n_contacts(); ++i) {
        if (lambda.tangential(i).norm() > mu * lambda.normal(i) + tol) return false;
    }
    return true;
}

// All contact candidates of a configuration, with everything the losses and
// the stepper need: per-contact body/vertex identity, gaps, and the contact
// Jacobian in per-contact triple rows (n, tx, ty) aligned with
// ContactImpulse::data. J is built from kinematics at the given q.
struct ContactSet {
    std::vector<int> body;     // body index per contact
    std::vector<Vec3> vertex;  // body-frame vertex per contact
    VecX phi;                  // world height of each vertex
    MatX jac;                  // 3p x n_vel, triple row layout

    int n_contacts() const { return static_cast<int>(body.size()); }
};

inline ContactSet contact_set(const Model& m, const std::vector<Polytope>& polys,
                              const Kinematics& kin)
{
    if (static_cast<int>(polys.size()) != m.n_bodies()) {
        throw std::invalid_argument("contact_set: one polytope per body required");
    }
    int p = 0;
    for (const Polytope& poly : polys) p += static_cast<int>(poly.vertices.size());

    ContactSet cs;
    cs.body.reserve(p);
    cs.vertex.reserve(p);
    cs.phi.resize(p);
    cs.jac.resize(3 * p, kin.body_jac[0].cols());

    int i = 0;
    for (int b = 0; b < m.n_bodies(); ++b) {
        for (const Vec3& v : polys[b].vertices) {
            cs.body.push_back(b);
            cs.vertex.push_back(v);
            cs.phi[i] = (kin.pos[b] + kin.rot[b] * v).z();
            // World point velocity = R (u_lin + w x v) = R [-skew(v) I] W vgen.
            const MatX jp =
                kin.rot[b] * ((Eigen::Matrix<double, 3, 6>() << -skew(v), Mat3::Identity())
                                  .finished() *
                              kin.body_jac[b]);
            cs.jac.row(3 * i + 0) = jp.row(2);
            cs.jac.row(3 * i + 1) = jp.row(0);
            cs.jac.row(3 * i + 2) = jp.row(1);
            ++i;
        }
    }
    return cs;
}

inline ContactSet contact_set(const Model& m, const std::vector<Polytope>& polys,
                              const Configuration& q)
{
    return contact_set(m, polys, forward_kinematics(m, q));
}

inline std::vector<Polytope> model_polytopes(const Model& m)
{
    std::vector<Polytope> out;
    out.reserve(m.bodies.size());
    for (const Body& b : m.bodies) out.push_back(b.geometry);
    return out;
}

inline VecX signed_distances(const Model& m, const std::vector<Polytope>& polys,
                             const Configuration& q)
{
    return contact_set(m, polys, q).phi;
}

// Row blocks [J_n (p rows); J_t (2p rows)]: normal velocity per contact,
// then world x/y tangential velocity pairs.
inline MatX contact_jacobian(const Model& m, const std::vector<Polytope>& polys,
                             const Configuration& q)
{
    const ContactSet cs = contact_set(m, polys, q);
    const int p = cs.n_contacts();
    MatX j(3 * p, cs.jac.cols());
    for (int i = 0; i < p; ++i) {
        j.row(i) = cs.jac.row(3 * i);
        j.row(p + 2 * i + 0) = cs.jac.row(3 * i + 1);
        j.row(p + 2 * i + 1) = cs.jac.row(3 * i + 2);
    }
    return j;
}

}  // namespace cisid
