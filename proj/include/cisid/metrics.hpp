#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "inertia.hpp"
#include "math.hpp"
#include "model.hpp"
#include "multibody.hpp"
#include "rng.hpp"
#include "simulator.hpp"

// Parameter-error metrics (geometry, friction, inertia) and trajectory
// rollout errors. Hull volumes are exact; only the intersection volume in
// the geometry metric is estimated, by seeded Monte Carlo over the union's
// bounding box, so results are deterministic for a fixed configuration.

namespace cisid {

namespace detail {

struct FacePlane {
    Vec3 n;    // unit outward normal
    double d;  // n . x = d on the face
};

// Supporting planes of the convex hull of a vertex cloud. Every vertex
// triple whose plane has all points on one side contributes; duplicates
// (triangulations of the same face) collapse to one entry.
inline std::vector<FacePlane> hull_faces(const std::vector<Vec3>& verts)
{
    const int n = static_cast<int>(verts.size());
    std::vector<FacePlane> faces;
    if (n < 4) return faces;
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& v : verts) centroid += v;
    centroid /= n;

    const double tol = 1e-9;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            for (int k = j + 1; k < n; ++k) {
                Vec3 nrm = (verts[j] - verts[i]).cross(verts[k] - verts[i]);
                const double area2 = nrm.norm();
                if (area2 < 1e-14) continue;
                nrm /= area2;
                double d = nrm.dot(verts[i]);
                double lo = 0.0, hi = 0.0;
                for (const Vec3& v : verts) {
                    const double s = nrm.dot(v) - d;
                    lo = std::min(lo, s);
                    hi = std::max(hi, s);
                }
                if (lo < -tol && hi > tol) continue;  // not supporting
                if (hi > tol || nrm.dot(centroid) > d) {
                    nrm = -nrm;
                    d = -d;
                }
                bool dup = false;
                for (const FacePlane& f : faces)
                    dup = dup || (f.n.dot(nrm) > 1.0 - 1e-9 && std::abs(f.d - d) < 1e-9);
                if (!dup) faces.push_back(FacePlane{nrm, d});
            }
        }
    }
    return faces;
}

inline bool point_inside(const std::vector<FacePlane>& faces, const Vec3& p)
{
    for (const FacePlane& f : faces)
        if (f.n.dot(p) > f.d + 1e-12) return false;
    return !faces.empty();
}

}  // namespace detail

// Exact convex hull volume: cone decomposition from the centroid over each
// face polygon, the polygon ordered by angle in its own plane.
inline double hull_volume(const std::vector<Vec3>& verts)
{
    const std::vector<detail::FacePlane> faces = detail::hull_faces(verts);
    if (faces.empty()) return 0.0;
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& v : verts) centroid += v;
    centroid /= static_cast<double>(verts.size());

    double vol = 0.0;
    for (const detail::FacePlane& f : faces) {
        std::vector<Vec3> poly;
        for (const Vec3& v : verts)
            if (std::abs(f.n.dot(v) - f.d) <= 1e-9) poly.push_back(v);
        if (poly.size() < 3) continue;
        Vec3 fc = Vec3::Zero();
        for (const Vec3& v : poly) fc += v;
        fc /= static_cast<double>(poly.size());
        const Vec3 t1 = (poly[0] - fc).normalized();
        const Vec3 t2 = f.n.cross(t1);
        std::sort(poly.begin(), poly.end(), [&](const Vec3& a, const Vec3& b) {
            return std::atan2(t2.dot(a - fc), t1.dot(a - fc)) <
                   std::atan2(t2.dot(b - fc), t1.dot(b - fc));
        });
        for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
            const double det = (poly[0] - centroid)
                                   .dot((poly[i] - centroid).cross(poly[i + 1] - centroid));
            vol += std::abs(det) / 6.0;
        }
    }
    return vol;
}

struct VolumeConfig {
    std::int64_t samples = 2000000;
    std::uint64_t seed = 0x9e0d15u;  // fixed by convention; per-body substreams
};

// Monte Carlo volume of hull(a) ∩ hull(b), sampling the union's axis-aligned
// bounding box. Deterministic for fixed inputs, sample count, and seed.
inline double intersection_volume_mc(const std::vector<Vec3>& a, const std::vector<Vec3>& b,
                                     std::int64_t samples, std::uint64_t seed)
{
    if (samples < 1) throw std::invalid_argument("intersection_volume_mc: samples < 1");
    const std::vector<detail::FacePlane> fa = detail::hull_faces(a);
    const std::vector<detail::FacePlane> fb = detail::hull_faces(b);
    if (fa.empty() || fb.empty()) return 0.0;

    Vec3 lo = a[0], hi = a[0];
    for (const Vec3& v : a) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    for (const Vec3& v : b) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const Vec3 span = hi - lo;
    const double box_vol = span.x() * span.y() * span.z();
    if (box_vol <= 0.0) return 0.0;

    Rng rng(seed);
    std::int64_t inside = 0;
    for (std::int64_t s = 0; s < samples; ++s) {
        const Vec3 p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()),
                     rng.uniform(lo.z(), hi.z()));
        if (detail::point_inside(fa, p) && detail::point_inside(fb, p)) ++inside;
    }
    return box_vol * static_cast<double>(inside) / static_cast<double>(samples);
}

// Mean over bodies of Vol(symmetric difference) / Vol(actual), using
// Vol(A) + Vol(B) - 2 Vol(A ∩ B) with exact hull volumes and the Monte
// Carlo intersection.
inline double e_volume(const std::vector<Polytope>& learned, const std::vector<Polytope>& actual,
                       const VolumeConfig& cfg = {})
{
    if (learned.size() != actual.size())
        throw std::invalid_argument("e_volume: body count mismatch");
    if (learned.empty()) throw std::invalid_argument("e_volume: no bodies");
    double total = 0.0;
    for (std::size_t i = 0; i < learned.size(); ++i) {
        const double va = hull_volume(learned[i].vertices);
        const double vb = hull_volume(actual[i].vertices);
        if (vb <= 1e-12) throw std::invalid_argument("e_volume: degenerate actual hull");
        const double vi =
            va <= 1e-12 ? 0.0
                        : intersection_volume_mc(learned[i].vertices, actual[i].vertices,
                                                 cfg.samples,
                                                 substream_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        // The symmetric difference is nonnegative; sampling jitter on nearly
        // identical hulls may land epsilon below zero, so clamp.
        total += std::max(0.0, va + vb - 2.0 * vi) / vb;
    }
    return total / static_cast<double>(learned.size());
}

inline double e_friction(const VecX& learned, const VecX& actual)
{
    if (learned.size() != actual.size())
        throw std::invalid_argument("e_friction: length mismatch");
    return (learned - actual).norm();
}

// Reciprocal characteristic scales for the per-body inertial 10-vectors
// [m, p, I]. Entries must be strictly positive.
struct InertiaNormalizer {
    std::vector<Pi10> s;
};

// Built from the actual values: 1/m for mass, a fixed characteristic com
// distance, and the magnitude of each actual inertia entry; entries whose
// actual value is (numerically) zero, such as products of inertia of a
// symmetric body, reuse the body's mean moment scale.
inline InertiaNormalizer make_inertia_normalizer(const std::vector<Pi10>& actual,
                                                 double com_scale = 0.035)
{
    InertiaNormalizer out;
    for (const Pi10& a : actual) {
        if (a[0] <= 0.0) throw std::invalid_argument("inertia normalizer: nonpositive mass");
        const double moment =
            (std::abs(a[4]) + std::abs(a[5]) + std::abs(a[6])) / 3.0;
        if (moment <= 0.0) throw std::invalid_argument("inertia normalizer: zero moments");
        Pi10 s;
        s[0] = 1.0 / a[0];
        s[1] = s[2] = s[3] = 1.0 / com_scale;
        for (int k = 4; k < 10; ++k)
            s[k] = std::abs(a[k]) > 1e-9 * moment ? 1.0 / std::abs(a[k]) : 1.0 / moment;
        out.s.push_back(s);
    }
    return out;
}

// Euclidean norm of the elementwise s-scaled differences, concatenated over
// bodies.
inline double e_inertia(const std::vector<Pi10>& learned, const std::vector<Pi10>& actual,
                        const InertiaNormalizer& norm)
{
    if (learned.size() != actual.size() || learned.size() != norm.s.size())
        throw std::invalid_argument("e_inertia: body count mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < learned.size(); ++i)
        sq += (norm.s[i].cwiseProduct(learned[i] - actual[i])).squaredNorm();
    return std::sqrt(sq);
}

struct TrajErrorReport {
    double pos_error = 0.0;  // m, mean over valid trajectories
    double rot_error = 0.0;  // degrees, mean over valid trajectories
    int n_failed = 0;        // rollouts excluded for non-finite states
    std::vector<double> per_traj_pos;  // valid trajectories, input order
    std::vector<double> per_traj_rot;
};

// Any open-loop predictor: initial state, horizon, step size -> trajectory.
using RolloutFn = std::function<Trajectory(const State&, int, double)>;

// Compares each predicted rollout against the recorded states, skipping the
// shared initial state. Positions compare at each body's center of mass in
// the frame model, mapped through both kinematic frames; rotations use the
// geodesic angle in degrees. A predictor that throws, truncates, or leaves
// the valid state set marks that trajectory failed.
inline TrajErrorReport traj_errors_fn(const Model& frame, const std::vector<Trajectory>& tests,
                                      const RolloutFn& predict)
{
    if (tests.empty()) throw std::invalid_argument("traj_errors: no test trajectories");
    TrajErrorReport out;
    for (const Trajectory& obs : tests) {
        bool ok = true;
        double pos_sum = 0.0, rot_sum = 0.0;
        long count = 0;
        try {
            const Trajectory pred = predict(obs.states.front(), obs.n_steps(), obs.dt);
            if (static_cast<int>(pred.states.size()) != obs.n_steps() + 1) ok = false;
            for (int k = 1; k <= obs.n_steps() && ok; ++k) {
                if (!pred.states[k].q.valid(1e-6) || !pred.states[k].v.flat().allFinite() ||
                    !obs.states[k].q.valid(1e-6)) {
                    ok = false;
                    break;
                }
                const Kinematics ko = forward_kinematics(frame, obs.states[k].q);
                const Kinematics kp = forward_kinematics(frame, pred.states[k].q);
                for (int b = 0; b < frame.n_bodies(); ++b) {
                    const Vec3 com = frame.bodies[b].inertia.com;
                    const Vec3 po = ko.pos[b] + ko.rot[b] * com;
                    const Vec3 pp = kp.pos[b] + kp.rot[b] * com;
                    pos_sum += (po - pp).norm();
                    // atan2 form of the geodesic angle: exact zero for equal
                    // rotations, where acos(trace) loses half the digits.
                    const Quat rel = Quat(ko.rot[b]).conjugate() * Quat(kp.rot[b]);
                    rot_sum += 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w())) *
                               180.0 / std::numbers::pi;
                    ++count;
                }
            }
        } catch (const std::exception&) {
            ok = false;
        }
        if (ok && count > 0) {
            out.per_traj_pos.push_back(pos_sum / static_cast<double>(count));
            out.per_traj_rot.push_back(rot_sum / static_cast<double>(count));
        } else {
            ++out.n_failed;
        }
    }
    if (out.per_traj_pos.empty()) throw std::runtime_error("traj_errors: all rollouts failed");
    for (double e : out.per_traj_pos) out.pos_error += e;
    for (double e : out.per_traj_rot) out.rot_error += e;
    out.pos_error /= static_cast<double>(out.per_traj_pos.size());
    out.rot_error /= static_cast<double>(out.per_traj_rot.size());
    return out;
}

// Stepper-based replay of the model itself. The residual acceleration (if
// any) belongs to the learned model; external effects the model does not
// know about (vortex drag, rescaled gravity) are deliberately absent. When
// given, `frame` supplies the reference centers of mass so errors stay
// comparable across learned models.
inline TrajErrorReport traj_errors(const Model& m, const std::vector<Trajectory>& tests,
                                   const StepperConfig& cfg = {},
                                   const ResidualAccel* residual = nullptr,
                                   const Model* frame = nullptr)
{
    return traj_errors_fn(frame != nullptr ? *frame : m, tests,
                          [&](const State& x0, int steps, double dt) {
                              return rollout(m, x0, steps, dt, cfg, nullptr, residual);
                          });
}

struct MetricReport {
    double e_volume = 0.0;
    double e_friction = 0.0;
    double e_inertia = 0.0;
    double traj_pos_error = 0.0;  // m
    double traj_rot_error = 0.0;  // degrees
    int n_rollout_failures = 0;
    std::vector<double> per_traj_pos;
    std::vector<double> per_traj_rot;
};

// All metrics of a learned model against the actual one on held-out
// trajectories. Both models must share the kinematic skeleton.
inline MetricReport evaluate_metrics(const Model& learned, const Model& actual,
                                     const std::vector<Trajectory>& tests,
                                     const StepperConfig& step_cfg = {},
                                     const ResidualAccel* residual = nullptr,
                                     const VolumeConfig& vol_cfg = {})
{
    if (learned.n_bodies() != actual.n_bodies())
        throw std::invalid_argument("evaluate_metrics: body count mismatch");
    MetricReport r;
    r.e_volume = e_volume(model_polytopes(learned), model_polytopes(actual), vol_cfg);
    VecX mu_l(1), mu_a(1);
    mu_l << learned.friction;
    mu_a << actual.friction;
    r.e_friction = e_friction(mu_l, mu_a);
    std::vector<Pi10> il, ia;
    for (int b = 0; b < actual.n_bodies(); ++b) {
        il.push_back(learned.bodies[b].inertia.to_metric_vector());
        ia.push_back(actual.bodies[b].inertia.to_metric_vector());
    }
    r.e_inertia = e_inertia(il, ia, make_inertia_normalizer(ia));
    const TrajErrorReport t = traj_errors(learned, tests, step_cfg, residual, &actual);
    r.traj_pos_error = t.pos_error;
    r.traj_rot_error = t.rot_error;
    r.n_rollout_failures = t.n_failed;
    r.per_traj_pos = t.per_traj_pos;
    r.per_traj_rot = t.per_traj_rot;
    return r;
}

}  // namespace cisid
