#pragma once

// System state types: configuration (base pose + joint angles) and
// generalized velocity.
//
// Conventions used throughout the library:
//   - base_orientation maps body frame to world frame (Hamilton quaternion),
//   - base_angular is expressed in the body frame,
//   - base_linear is the world-frame velocity of the body-frame origin,
//   - generalized velocity ordering is [angular(3); linear(3); joint_rates].

#include "cisid/math.hpp"

#include <stdexcept>
#include <vector>

namespace cisid {

struct Configuration {
    Vec3 base_position = Vec3::Zero();
    Quat base_orientation = Quat::Identity();
    VecX joint_angles;  // length 0 or 1

    int n_joints() const { return static_cast<int>(joint_angles.size()); }

    bool valid(double tol = 1e-9) const
    {
        return std::abs(base_orientation.norm() - 1.0) <= tol &&
               base_position.allFinite() && joint_angles.allFinite();
    }

    // Flat layout [px py pz qw qx qy qz joints...]; used by dataset files.
    VecX flat() const
    {
        VecX out(7 + n_joints());
        out.head<3>() = base_position;
        out[3] = base_orientation.w();
        out[4] = base_orientation.x();
        out[5] = base_orientation.y();
        out[6] = base_orientation.z();
        out.tail(n_joints()) = joint_angles;
        return out;
    }

    static Configuration from_flat(const VecX& f)
    {
        if (f.size() < 7) throw std::invalid_argument("configuration: flat vector too short");
        Configuration q;
        q.base_position = f.head<3>();
        q.base_orientation = Quat(f[3], f[4], f[5], f[6]);
        q.joint_angles = f.tail(f.size() - 7);
        return q;
    }
};

struct Velocity {
    Vec3 base_angular = Vec3::Zero();  // body frame
    Vec3 base_linear = Vec3::Zero();   // world frame
    VecX joint_rates;

    int n_vel() const { return 6 + static_cast<int>(joint_rates.size()); }

    VecX flat() const
    {
        VecX out(n_vel());
        out.head<3>() = base_angular;
        out.segment<3>(3) = base_linear;
        out.tail(joint_rates.size()) = joint_rates;
        return out;
    }

    static Velocity from_flat(const VecX& f)
    {
        if (f.size() < 6) throw std::invalid_argument("velocity: flat vector too short");
        Velocity v;
        v.base_angular = f.head<3>();
        v.base_linear = f.segment<3>(3);
        v.joint_rates = f.tail(f.size() - 6);
        return v;
    }
};

struct State {
    Configuration q;
    Velocity v;
    VecX u;  // control input; always empty for the systems studied here

    int n_vel() const { return v.n_vel(); }
};

// One observed step: the atomic training datum.
struct TransitionSample {
    State x_k;
    State x_k1;
    double dt = 0.0;
};

}  // namespace cisid
