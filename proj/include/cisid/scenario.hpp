#pragma once

// Benchmark scenarios: true models, toss distributions, and dataset
// generation. Data is always produced at standard gravity; scenarios that
// sweep the learner's believed gravity or add an unmodeled vortex field only
// change what the learner sees, never the data-generating model.

#include "cisid/model.hpp"
#include "cisid/rng.hpp"
#include "cisid/simulator.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace cisid {

struct TossParams {
    double height_min = 0.2;
    double height_max = 0.5;
    double horizontal_radius = 0.05;    // base x/y spread at release
    double max_angular_speed = 15.0;    // rad/s
    double max_horizontal_speed = 1.0;  // m/s
    double vz_min = -0.5;
    double vz_max = 0.0;
    double joint_angle_range = 1.5707963267948966;  // +- pi/2
    double joint_rate_range = 5.0;
    double min_clearance = 0.01;  // lowest vertex must start above this
    int max_attempts = 200;
};

enum class ScenarioKind { CubeToss, ArticulatedToss, VortexAsymmetric, GravityScale };

inline Mat3 box_rotational_inertia(double mass, const Vec3& dims)
{
    const Vec3 d2 = dims.cwiseProduct(dims);
    return (mass / 12.0) *
           Mat3(Vec3(d2.y() + d2.z(), d2.x() + d2.z(), d2.x() + d2.y()).asDiagonal());
}

inline std::vector<Vec3> box_vertices(const Vec3& dims)
{
    std::vector<Vec3> v;
    for (const double sx : {-0.5, 0.5})
        for (const double sy : {-0.5, 0.5})
            for (const double sz : {-0.5, 0.5})
                v.emplace_back(sx * dims.x(), sy * dims.y(), sz * dims.z());
    return v;
}

struct Scenario {
    std::string name;
    ScenarioKind kind = ScenarioKind::CubeToss;
    TossParams toss;
    VortexParams vortex;
    bool has_vortex = false;
    double dt = 0.01;
    int steps = 75;

    Model true_model() const
    {
        Model m;
        m.gravity = 9.81;
        m.friction = 0.3;
        switch (kind) {
            case ScenarioKind::CubeToss:
            case ScenarioKind::GravityScale: {
                m.name = "cube";
                Body b;
                b.name = "cube";
                b.geometry.vertices = box_vertices(Vec3(0.1, 0.1, 0.1));
                b.inertia.mass = 0.37;
                b.inertia.com = Vec3::Zero();
                b.inertia.rot_inertia = box_rotational_inertia(0.37, Vec3(0.1, 0.1, 0.1));
                m.bodies.push_back(b);
                break;
            }
            case ScenarioKind::ArticulatedToss: {
                m.name = "two_link";
                const Vec3 dims(0.1, 0.05, 0.05);
                for (const char* nm : {"link0", "link1"}) {
                    Body b;
                    b.name = nm;
                    b.geometry.vertices = box_vertices(dims);
                    b.inertia.mass = 0.25;
                    b.inertia.com = Vec3::Zero();
                    b.inertia.rot_inertia = box_rotational_inertia(0.25, dims);
                    m.bodies.push_back(b);
                }
                RevoluteJoint j;
                j.parent = 0;
                j.child = 1;
                j.axis = Vec3::UnitZ();
                j.parent_position = Vec3(0.05, 0, 0);
                j.parent_orientation = Quat::Identity();
                j.child_position = Vec3(-0.05, 0, 0);
                j.child_orientation = Quat::Identity();
                m.joints.push_back(j);
                break;
            }
            case ScenarioKind::VortexAsymmetric: {
                m.name = "asymmetric";
                Body b;
                b.name = "asymmetric";
                b.geometry.vertices = {Vec3(0.06, 0, 0),  Vec3(-0.06, 0, 0),
                                       Vec3(0, 0.05, 0),  Vec3(0, -0.05, 0),
                                       Vec3(0, 0, 0.04),  Vec3(0, 0, -0.04)};
                b.inertia.mass = 0.25;
                b.inertia.com = Vec3::Zero();
                b.inertia.rot_inertia = 8.1e-4 * Mat3::Identity();
                m.bodies.push_back(b);
                break;
            }
        }
        m.total_mass = m.body_mass_sum();
        m.validate();
        return m;
    }
};

inline Scenario make_scenario(const std::string& name)
{
    Scenario sc;
    sc.name = name;
    if (name == "cube_toss") {
        sc.kind = ScenarioKind::CubeToss;
    } else if (name == "articulated_toss") {
        sc.kind = ScenarioKind::ArticulatedToss;
    } else if (name == "vortex_asymmetric") {
        sc.kind = ScenarioKind::VortexAsymmetric;
        sc.has_vortex = true;
        sc.toss.horizontal_radius = 0.4;  // sample the field away from the axis
    } else if (name == "gravity_scale") {
        sc.kind = ScenarioKind::GravityScale;
    } else {
        throw std::invalid_argument("unknown scenario: " + name);
    }
    return sc;
}

// Draw order is fixed: position x, y, z; orientation (4 normals); joint
// angles; clearance check (pose redrawn on failure); then angular direction
// (3 normals) and magnitude, horizontal direction angle and speed, vertical
// velocity, joint rates.
inline State sample_toss(const Model& m, const TossParams& tp, Rng& rng)
{
    const std::vector<Polytope> polys = model_polytopes(m);
    const int nj = m.n_joints();
    State x;
    x.q.joint_angles.resize(nj);

    bool clear = false;
    for (int attempt = 0; attempt < tp.max_attempts && !clear; ++attempt) {
        x.q.base_position =
            Vec3(rng.uniform(-tp.horizontal_radius, tp.horizontal_radius),
                 rng.uniform(-tp.horizontal_radius, tp.horizontal_radius),
                 rng.uniform(tp.height_min, tp.height_max));
        const double a = rng.normal(0, 1), b = rng.normal(0, 1);
        const double c = rng.normal(0, 1), d = rng.normal(0, 1);
        x.q.base_orientation = Quat(a, b, c, d).normalized();
        for (int j = 0; j < nj; ++j)
            x.q.joint_angles[j] = rng.uniform(-tp.joint_angle_range, tp.joint_angle_range);
        clear = signed_distances(m, polys, x.q).minCoeff() >= tp.min_clearance;
    }
    if (!clear) throw std::runtime_error("sample_toss: no clear pose found");

    Vec3 axis(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1));
    if (axis.norm() < 1e-12) axis = Vec3::UnitZ();
    x.v.base_angular = rng.uniform(0.0, tp.max_angular_speed) * axis.normalized();
    const double heading = rng.uniform(0.0, 2.0 * 3.141592653589793);
    const double speed = rng.uniform(0.0, tp.max_horizontal_speed);
    x.v.base_linear = Vec3(speed * std::cos(heading), speed * std::sin(heading),
                           rng.uniform(tp.vz_min, tp.vz_max));
    x.v.joint_rates.resize(nj);
    for (int j = 0; j < nj; ++j)
        x.v.joint_rates[j] = rng.uniform(-tp.joint_rate_range, tp.joint_rate_range);
    return x;
}

inline std::vector<TransitionSample> trajectory_transitions(const Trajectory& t)
{
    std::vector<TransitionSample> out;
    out.reserve(t.states.size() - 1);
    for (std::size_t k = 0; k + 1 < t.states.size(); ++k) {
        out.push_back(TransitionSample{t.states[k], t.states[k + 1], t.dt});
    }
    return out;
}

struct Dataset {
    std::string scenario;
    double dt = 0.0;
    int steps = 0;
    std::string model_hash;
    std::uint64_t seed = 0;
    std::vector<Trajectory> trajectories;

    int n_trajectories() const { return static_cast<int>(trajectories.size()); }
};

// Tosses are rolled out with the true model; each must touch down at least
// once (some impulse fires), otherwise the toss is redrawn from the same
// per-trajectory substream.
inline Dataset generate_dataset(const Scenario& sc, int n_tosses, std::uint64_t seed,
                                const StepperConfig& cfg = {})
{
    const Model m = sc.true_model();
    Dataset ds;
    ds.scenario = sc.name;
    ds.dt = sc.dt;
    ds.steps = sc.steps;
    ds.model_hash = model_hash(m);
    ds.seed = seed;
    ds.trajectories.reserve(n_tosses);

    const VortexParams* vp = sc.has_vortex ? &sc.vortex : nullptr;
    for (int i = 0; i < n_tosses; ++i) {
        Rng rng(substream_seed(seed, static_cast<std::uint64_t>(i)));
        bool accepted = false;
        for (int attempt = 0; attempt < 50 && !accepted; ++attempt) {
            const State x0 = sample_toss(m, sc.toss, rng);
            Trajectory traj = rollout(m, x0, sc.steps, sc.dt, cfg, vp);
            if (traj.contact_events >= 1) {
                ds.trajectories.push_back(std::move(traj));
                accepted = true;
            }
        }
        if (!accepted) throw std::runtime_error("generate_dataset: toss never made contact");
    }
    return ds;
}

}  // namespace cisid
