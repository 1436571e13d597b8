#pragma once

// Small dense networks with hand-rolled backprop. Parameters live in one flat
// vector (layer weights row-major, then biases, layer by layer) so optimizer
// state and checkpoints stay trivial.

#include "cisid/json_util.hpp"
#include "cisid/math.hpp"
#include "cisid/rng.hpp"
#include "cisid/state.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace cisid {

enum class Activation { ReLU, Tanh };

struct Mlp {
    std::vector<int> dims;  // layer widths, input first
    Activation act = Activation::ReLU;
    VecX params;

    int n_layers() const { return static_cast<int>(dims.size()) - 1; }

    int n_params() const
    {
        int n = 0;
        for (int l = 0; l < n_layers(); ++l) n += dims[l + 1] * (dims[l] + 1);
        return n;
    }

    int weight_offset(int layer) const
    {
        int off = 0;
        for (int l = 0; l < layer; ++l) off += dims[l + 1] * (dims[l] + 1);
        return off;
    }

    Eigen::Map<const MatX> weight(int layer) const
    {
        return {params.data() + weight_offset(layer), dims[layer + 1], dims[layer]};
    }
    Eigen::Map<const VecX> bias(int layer) const
    {
        return {params.data() + weight_offset(layer) + dims[layer + 1] * dims[layer],
                dims[layer + 1]};
    }

    // Hidden-layer activations; the final layer is linear.
    struct Tape {
        VecX input;
        std::vector<VecX> pre;   // pre-activation per layer
        std::vector<VecX> post;  // post-activation per hidden layer
    };

    VecX forward(const VecX& x, Tape* tape = nullptr) const
    {
        if (x.size() != dims.front()) throw std::invalid_argument("mlp: input size mismatch");
        if (tape) {
            tape->input = x;
            tape->pre.clear();
            tape->post.clear();
        }
        VecX h = x;
        for (int l = 0; l < n_layers(); ++l) {
            VecX z = weight(l) * h + bias(l);
            if (tape) tape->pre.push_back(z);
            if (l + 1 < n_layers()) {
                if (act == Activation::ReLU) {
                    h = z.cwiseMax(0.0);
                } else {
                    h = z.array().tanh().matrix();
                }
                if (tape) tape->post.push_back(h);
            } else {
                h = std::move(z);
            }
        }
        return h;
    }

    // Accumulates dL/dparams into grad (size n_params) and returns dL/dinput.
    VecX backward(const Tape& tape, const VecX& upstream, VecX& grad) const
    {
        if (grad.size() != n_params()) throw std::invalid_argument("mlp: grad size mismatch");
        VecX delta = upstream;
        for (int l = n_layers() - 1; l >= 0; --l) {
            const VecX& in = l == 0 ? tape.input : tape.post[l - 1];
            const int off = weight_offset(l);
            Eigen::Map<MatX> gw(grad.data() + off, dims[l + 1], dims[l]);
            Eigen::Map<VecX> gb(grad.data() + off + dims[l + 1] * dims[l], dims[l + 1]);
            gw.noalias() += delta * in.transpose();
            gb += delta;
            if (l == 0) return weight(0).transpose() * delta;
            VecX down = weight(l).transpose() * delta;
            if (act == Activation::ReLU) {
                delta = (tape.pre[l - 1].array() > 0.0).select(down, 0.0);
            } else {
                delta = (1.0 - tape.post[l - 1].array().square()) * down.array();
            }
        }
        return delta;  // unreachable for n_layers() >= 1
    }

    // Frobenius norm squared of the weight matrices; biases excluded.
    double weight_norm_sq() const
    {
        double s = 0.0;
        for (int l = 0; l < n_layers(); ++l) s += weight(l).squaredNorm();
        return s;
    }

    void add_weight_norm_gradient(double coeff, VecX& grad) const
    {
        for (int l = 0; l < n_layers(); ++l) {
            const int off = weight_offset(l);
            Eigen::Map<MatX> gw(grad.data() + off, dims[l + 1], dims[l]);
            gw += 2.0 * coeff * weight(l);
        }
    }

    // Fan-in uniform initialization; optionally zero the final layer so the
    // network starts as the identity-plus-nothing correction.
    static Mlp create(std::vector<int> layer_dims, Activation activation, Rng& rng,
                      bool zero_final)
    {
        Mlp net;
        net.dims = std::move(layer_dims);
        net.act = activation;
        net.params.resize(net.n_params());
        for (int l = 0; l < net.n_layers(); ++l) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(net.dims[l]));
            const int off = net.weight_offset(l);
            const int count = net.dims[l + 1] * (net.dims[l] + 1);
            for (int k = 0; k < count; ++k)
                net.params[off + k] = rng.uniform(-bound, bound);
            if (zero_final && l == net.n_layers() - 1)
                net.params.segment(off, count).setZero();
        }
        return net;
    }
};

inline Json json_from_mlp(const Mlp& net)
{
    Json j;
    j["dims"] = net.dims;
    j["activation"] = net.act == Activation::ReLU ? "relu" : "tanh";
    j["params"] = json_from_vecx(net.params);
    return j;
}

inline Mlp mlp_from_json(const Json& j)
{
    require_keys(j, "mlp", {"dims", "activation", "params"});
    Mlp net;
    net.dims = j.at("dims").get<std::vector<int>>();
    const std::string a = j.at("activation").get<std::string>();
    if (a == "relu") net.act = Activation::ReLU;
    else if (a == "tanh") net.act = Activation::Tanh;
    else throw std::invalid_argument("mlp: unknown activation " + a);
    net.params = vecx_from_json(j.at("params"), "mlp params");
    if (net.params.size() != net.n_params())
        throw std::invalid_argument("mlp: parameter count mismatch");
    return net;
}

// Rotation-unique state embedding: [position, rotation matrix row-major,
// joint angles, generalized velocity]. Antipodal quaternions map to the same
// feature.
inline int quat_feature_dim(int n_joints) { return 3 + 9 + n_joints + 6 + n_joints; }

inline VecX quat_feature(const State& x)
{
    const int nj = x.q.n_joints();
    VecX f(quat_feature_dim(nj));
    f.head<3>() = x.q.base_position;
    const Mat3 r = x.q.base_orientation.toRotationMatrix();
    for (int i = 0; i < 3; ++i) f.segment<3>(3 + 3 * i) = r.row(i);
    f.segment(12, nj) = x.q.joint_angles;
    f.tail(6 + nj) = x.v.flat();
    return f;
}

// Raw embedding: [configuration flat (with quaternion), generalized velocity].
inline int raw_feature_dim(int n_joints) { return 7 + n_joints + 6 + n_joints; }

inline VecX raw_feature(const State& x)
{
    VecX f(raw_feature_dim(x.q.n_joints()));
    f.head(7 + x.q.n_joints()) = x.q.flat();
    f.tail(x.v.n_vel()) = x.v.flat();
    return f;
}

// Residual acceleration head: two ReLU layers of 128, zero-initialized output
// so the initial correction vanishes.
inline Mlp make_residual_net(int n_joints, Rng& rng)
{
    return Mlp::create({quat_feature_dim(n_joints), 128, 128, 6 + n_joints},
                       Activation::ReLU, rng, true);
}

// Direct next-velocity predictor: four Tanh layers of 256 on the raw state
// embedding by default (rotation feature optional at construction).
inline Mlp make_end_to_end_net(int n_joints, Rng& rng, bool rotation_feature = false)
{
    const int in = rotation_feature ? quat_feature_dim(n_joints) : raw_feature_dim(n_joints);
    return Mlp::create({in, 256, 256, 256, 256, 6 + n_joints}, Activation::Tanh, rng, false);
}

}  // namespace cisid
