#pragma once

// Learnable structured parameters: per-body polytope vertices, per-body
// inertia coordinates theta, and a shared friction coefficient. Materializing
// a model rescales all per-body inertial vectors uniformly so the body masses
// sum to the skeleton's fixed total mass; theta therefore only determines
// shape and mass ratios, never the total.

#include "cisid/inertia.hpp"
#include "cisid/math.hpp"
#include "cisid/model.hpp"
#include "cisid/rng.hpp"

#include <stdexcept>
#include <vector>

namespace cisid {

struct StructuredParams {
    std::vector<std::vector<Vec3>> vertices;  // per body
    std::vector<Theta> thetas;                // per body
    double mu = 0.0;

    static StructuredParams from_model(const Model& m)
    {
        StructuredParams p;
        p.mu = m.friction;
        for (const Body& b : m.bodies) {
            p.vertices.push_back(b.geometry.vertices);
            p.thetas.push_back(theta_from_inertia(b.inertia));
        }
        return p;
    }

    // Zero-filled parameters with the same shape; gradient container.
    static StructuredParams zeros_like(const StructuredParams& shape)
    {
        StructuredParams p;
        p.mu = 0.0;
        p.thetas.assign(shape.thetas.size(), Theta::Zero());
        for (const auto& vs : shape.vertices) p.vertices.emplace_back(vs.size(), Vec3::Zero());
        return p;
    }

    int n_bodies() const { return static_cast<int>(thetas.size()); }

    int size() const
    {
        int n = 10 * n_bodies() + 1;
        for (const auto& vs : vertices) n += 3 * static_cast<int>(vs.size());
        return n;
    }

    // Flat order: all vertices body-major (xyz per vertex), all thetas, mu.
    VecX flatten() const
    {
        VecX out(size());
        int k = 0;
        for (const auto& vs : vertices)
            for (const Vec3& v : vs) {
                out.segment<3>(k) = v;
                k += 3;
            }
        for (const Theta& t : thetas) {
            out.segment<10>(k) = t;
            k += 10;
        }
        out[k] = mu;
        return out;
    }

    void set_flat(const VecX& x)
    {
        if (x.size() != size()) throw std::invalid_argument("set_flat: size mismatch");
        int k = 0;
        for (auto& vs : vertices)
            for (Vec3& v : vs) {
                v = x.segment<3>(k);
                k += 3;
            }
        for (Theta& t : thetas) {
            t = x.segment<10>(k);
            k += 10;
        }
        mu = x[k];
    }
};

// Per-body inertial vectors after the uniform total-mass rescale.
inline std::vector<Pi10> scaled_pi(const StructuredParams& p, double total_mass)
{
    std::vector<Pi10> raw(p.n_bodies());
    double mass_sum = 0.0;
    for (int b = 0; b < p.n_bodies(); ++b) {
        raw[b] = raw_pi_from_theta(p.thetas[b]);
        mass_sum += raw[b][0];
    }
    const double s = total_mass / mass_sum;
    for (Pi10& pi : raw) pi *= s;
    return raw;
}

inline Model apply_params(const Model& skeleton, const StructuredParams& p)
{
    if (p.n_bodies() != skeleton.n_bodies() ||
        static_cast<int>(p.vertices.size()) != skeleton.n_bodies()) {
        throw std::invalid_argument("apply_params: body count mismatch");
    }
    Model m = skeleton;
    const std::vector<Pi10> pis = scaled_pi(p, skeleton.total_mass);
    for (int b = 0; b < m.n_bodies(); ++b) {
        m.bodies[b].geometry.vertices = p.vertices[b];
        m.bodies[b].inertia = BodyInertia::from_pi(pis[b]);
    }
    m.friction = std::max(p.mu, 0.0);
    return m;
}

// Chain rule through the rescale: given gradients wrt the scaled per-body
// inertial vectors pi_hat_b = s * pi_b with s = M_tot / sum_c m_c, return
// gradients wrt theta.  d(pi_hat_b)/d(pi_c) = s delta_bc I + pi_b (ds/dpi_c)'
// with ds/dm_c = -M_tot / (sum m)^2.
inline std::vector<Theta> chain_pi_gradient(const StructuredParams& p, double total_mass,
                                            const std::vector<Pi10>& grad_pi_hat)
{
    const int nb = p.n_bodies();
    std::vector<Pi10> raw(nb);
    double mass_sum = 0.0;
    for (int b = 0; b < nb; ++b) {
        raw[b] = raw_pi_from_theta(p.thetas[b]);
        mass_sum += raw[b][0];
    }
    const double s = total_mass / mass_sum;
    const double ds_dm = -total_mass / (mass_sum * mass_sum);

    double pi_dot_g = 0.0;  // sum_b pi_b . grad_pi_hat_b
    for (int b = 0; b < nb; ++b) pi_dot_g += raw[b].dot(grad_pi_hat[b]);

    std::vector<Theta> out(nb);
    for (int c = 0; c < nb; ++c) {
        Pi10 grad_pi_c = s * grad_pi_hat[c];
        grad_pi_c[0] += ds_dm * pi_dot_g;
        out[c] = raw_pi_theta_jacobian(p.thetas[c]).transpose() * grad_pi_c;
    }
    return out;
}

// Initialization for identification runs: true geometry stretched per axis by
// U(0.5, 1.5), friction scaled by U(0.5, 1.5), and each body's inertia
// replaced by a randomly rotated uniform virtual box with dimensions scaled
// from the true polytope's bounding box by U(0.5, 1.5), center of mass
// uniform within the box's inner half, and mass scaled by U(0.5, 1.5).
inline StructuredParams sample_initial_parameters(const Model& truth, Rng& rng)
{
    StructuredParams p;
    for (const Body& body : truth.bodies) {
        const double sx = rng.uniform(0.5, 1.5);
        const double sy = rng.uniform(0.5, 1.5);
        const double sz = rng.uniform(0.5, 1.5);
        std::vector<Vec3> vs;
        vs.reserve(body.geometry.vertices.size());
        for (const Vec3& v : body.geometry.vertices)
            vs.emplace_back(sx * v.x(), sy * v.y(), sz * v.z());
        p.vertices.push_back(std::move(vs));
    }
    p.mu = rng.uniform(0.5, 1.5) * truth.friction;
    for (const Body& body : truth.bodies) {
        Vec3 lo = body.geometry.vertices.front();
        Vec3 hi = lo;
        for (const Vec3& v : body.geometry.vertices) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
        const Vec3 dims = (hi - lo).cwiseProduct(
            Vec3(rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5)));
        const Vec3 com(rng.uniform(-0.25, 0.25) * dims.x(),
                       rng.uniform(-0.25, 0.25) * dims.y(),
                       rng.uniform(-0.25, 0.25) * dims.z());
        const double mass = rng.uniform(0.5, 1.5) * body.inertia.mass;
        const Vec3 d2 = dims.cwiseProduct(dims);
        const Mat3 box_moments =
            (mass / 12.0) * Vec3(d2.y() + d2.z(), d2.x() + d2.z(), d2.x() + d2.y()).asDiagonal();
        Quat rot;
        {
            const double a = rng.normal(0, 1), b = rng.normal(0, 1);
            const double c = rng.normal(0, 1), d = rng.normal(0, 1);
            rot = Quat(a, b, c, d).normalized();
        }
        const Mat3 i_com = rot.toRotationMatrix() * box_moments *
                           rot.toRotationMatrix().transpose();
        BodyInertia inertia;
        inertia.mass = mass;
        inertia.com = com;
        inertia.rot_inertia =
            i_com + mass * (com.squaredNorm() * Mat3::Identity() - com * com.transpose());
        p.thetas.push_back(theta_from_inertia(inertia));
    }
    return p;
}

}  // namespace cisid
