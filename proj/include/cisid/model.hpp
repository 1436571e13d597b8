#pragma once

// Mechanical model description: rigid bodies with polytope collision
// geometry connected in a serial chain by revolute joints, plus a single
// friction coefficient shared by all contacts and the gravity magnitude the
// model believes in. This struct is both the ground-truth system used to
// generate data and the hypothesis being fit, so everything a learner can
// touch (vertices, friction, inertial parameters) lives here.

#include "cisid/inertia.hpp"
#include "cisid/json_util.hpp"
#include "cisid/math.hpp"

#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cisid {

struct Polytope {
    // Vertex cloud in the body frame; contact treats every vertex as a
    // candidate contact point against the ground plane z = 0.
    std::vector<Vec3> vertices;
};

// Joint frame J is rigidly attached to both parent and child; the child
// rotates about `axis` expressed in J. Child pose follows
//   T_world_child = T_world_parent * T_parent_joint * Rot(axis, angle) * T_child_joint^-1
// where T_child_joint is the pose of J in the child frame.
struct RevoluteJoint {
    int parent = 0;
    int child = 1;
    Vec3 axis = Vec3::UnitZ();
    Vec3 parent_position = Vec3::Zero();
    Quat parent_orientation = Quat::Identity();
    Vec3 child_position = Vec3::Zero();
    Quat child_orientation = Quat::Identity();

    // Joint motion subspace in child coordinates: unit rate produces child
    // twist (angular; linear at child origin).
    Vec6 motion_subspace() const
    {
        const Vec3 d = child_orientation * axis;
        Vec6 s;
        s.head<3>() = d;
        s.tail<3>() = child_position.cross(d);
        return s;
    }
};

struct Body {
    std::string name;
    Polytope geometry;
    BodyInertia inertia;
};

struct Model {
    std::string name;
    std::vector<Body> bodies;          // bodies[0] is the floating base
    std::vector<RevoluteJoint> joints;  // joints[j] connects body j to body j+1
    double friction = 1.0;
    double gravity = 9.81;    // magnitude, acting along world -z; 0 disables gravity
    double total_mass = 0.0;  // fixed; learning redistributes mass, never creates it

    int n_bodies() const { return static_cast<int>(bodies.size()); }
    int n_joints() const { return static_cast<int>(joints.size()); }
    int n_vel() const { return 6 + n_joints(); }
    double body_mass_sum() const
    {
        double m = 0.0;
        for (const Body& b : bodies) m += b.inertia.mass;
        return m;
    }

    void validate() const
    {
        if (bodies.empty()) throw std::invalid_argument("model: needs at least one body");
        if (joints.size() + 1 != bodies.size()) {
            throw std::invalid_argument("model: serial chain requires n_joints == n_bodies - 1");
        }
        for (int j = 0; j < n_joints(); ++j) {
            if (joints[j].parent != j || joints[j].child != j + 1) {
                throw std::invalid_argument("model: joint " + std::to_string(j) +
                                            " must connect body " + std::to_string(j) +
                                            " to body " + std::to_string(j + 1));
            }
            if (std::abs(joints[j].axis.norm() - 1.0) > 1e-9) {
                throw std::invalid_argument("model: joint axis must be unit length");
            }
        }
        for (const Body& b : bodies) {
            if (b.geometry.vertices.size() < 4) {
                throw std::invalid_argument("model: body '" + b.name +
                                            "' needs at least 4 vertices");
            }
            for (const Vec3& v : b.geometry.vertices) {
                if (!v.allFinite()) {
                    throw std::invalid_argument("model: body '" + b.name +
                                                "' has non-finite vertices");
                }
            }
            if (!b.inertia.is_physical()) {
                throw std::invalid_argument("model: body '" + b.name +
                                            "' has unphysical inertia");
            }
        }
        if (friction < 0.0) throw std::invalid_argument("model: friction must be >= 0");
        if (gravity < 0.0) throw std::invalid_argument("model: gravity must be >= 0");
        if (std::abs(body_mass_sum() - total_mass) > 1e-9) {
            throw std::invalid_argument("model: body masses must sum to total_mass");
        }
    }
};

inline Json json_from_model(const Model& m)
{
    Json jb = Json::array();
    for (const Body& b : m.bodies) {
        Json verts = Json::array();
        for (const Vec3& v : b.geometry.vertices) verts.push_back(json_from_vec3(v));
        jb.push_back({
            {"name", b.name},
            {"mass", b.inertia.mass},
            {"com", json_from_vec3(b.inertia.com)},
            {"inertia", Json::array({b.inertia.rot_inertia(0, 0), b.inertia.rot_inertia(1, 1),
                                     b.inertia.rot_inertia(2, 2), b.inertia.rot_inertia(0, 1),
                                     b.inertia.rot_inertia(0, 2), b.inertia.rot_inertia(1, 2)})},
            {"vertices", verts},
        });
    }
    Json jj = Json::array();
    for (const RevoluteJoint& j : m.joints) {
        jj.push_back({
            {"parent", j.parent},
            {"child", j.child},
            {"axis", json_from_vec3(j.axis)},
            {"parent_position", json_from_vec3(j.parent_position)},
            {"parent_orientation", json_from_quat(j.parent_orientation)},
            {"child_position", json_from_vec3(j.child_position)},
            {"child_orientation", json_from_quat(j.child_orientation)},
        });
    }
    return Json{{"name", m.name},
                {"gravity", m.gravity},
                {"friction", m.friction},
                {"total_mass", m.total_mass},
                {"bodies", jb},
                {"joints", jj}};
}

inline Model model_from_json(const Json& j)
{
    require_keys(j, "model", {"name", "gravity", "friction", "total_mass", "bodies", "joints"});
    Model m;
    m.name = j["name"].get<std::string>();
    m.gravity = j["gravity"].get<double>();
    m.friction = j["friction"].get<double>();
    m.total_mass = j["total_mass"].get<double>();
    for (const Json& bj : j["bodies"]) {
        require_keys(bj, "body", {"name", "mass", "com", "inertia", "vertices"});
        Body b;
        b.name = bj["name"].get<std::string>();
        b.inertia.mass = bj["mass"].get<double>();
        b.inertia.com = vec3_from_json(bj["com"], "body com");
        const Json& ij = bj["inertia"];
        if (!ij.is_array() || ij.size() != 6) {
            throw std::invalid_argument("body inertia: expected [Ixx,Iyy,Izz,Ixy,Ixz,Iyz]");
        }
        b.inertia.rot_inertia << ij[0].get<double>(), ij[3].get<double>(), ij[4].get<double>(),
                                 ij[3].get<double>(), ij[1].get<double>(), ij[5].get<double>(),
                                 ij[4].get<double>(), ij[5].get<double>(), ij[2].get<double>();
        for (const Json& vj : bj["vertices"]) {
            b.geometry.vertices.push_back(vec3_from_json(vj, "body vertex"));
        }
        m.bodies.push_back(std::move(b));
    }
    for (const Json& jj : j["joints"]) {
        require_keys(jj, "joint",
                     {"parent", "child", "axis", "parent_position", "parent_orientation",
                      "child_position", "child_orientation"});
        RevoluteJoint joint;
        joint.parent = jj["parent"].get<int>();
        joint.child = jj["child"].get<int>();
        joint.axis = vec3_from_json(jj["axis"], "joint axis").normalized();
        joint.parent_position = vec3_from_json(jj["parent_position"], "joint parent_position");
        joint.parent_orientation = quat_from_json(jj["parent_orientation"], "joint parent_orientation");
        joint.child_position = vec3_from_json(jj["child_position"], "joint child_position");
        joint.child_orientation = quat_from_json(jj["child_orientation"], "joint child_orientation");
        m.joints.push_back(joint);
    }
    m.validate();
    return m;
}

inline void save_model(const Model& m, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << json_from_model(m).dump(2) << "\n";
}

inline Model load_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read model file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("model file " + path + ": " + e.what());
    }
    return model_from_json(j);
}

// Stable identity of a model's content; nlohmann::json orders keys
// alphabetically and prints doubles shortest-exact, so equal models hash
// equal across processes.
inline std::string model_hash(const Model& m)
{
    return hash_hex(fnv1a(json_from_model(m).dump()));
}

}  // namespace cisid
