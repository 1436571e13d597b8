#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "nets.hpp"
#include "params.hpp"
#include "rng.hpp"
#include "scenario.hpp"
#include "simulator.hpp"

// Optimization loops for all four methods, experiment orchestration over
// (method, sweep value, seed) cells, and the result/summary tables. Every
// stochastic choice flows from explicit seeds through fixed substreams, and
// batch reductions run in a fixed order, so a config hash pins the output
// bit for bit.

namespace cisid {

enum class Method { CCN, CCN_R, DIFFSIM, END_TO_END };

inline const char* method_name(Method m)
{
    switch (m) {
        case Method::CCN: return "ccn";
        case Method::CCN_R: return "ccn_r";
        case Method::DIFFSIM: return "diffsim";
        case Method::END_TO_END: return "end_to_end";
    }
    throw std::logic_error("method_name: bad enum");
}

inline Method method_from_string(const std::string& s)
{
    if (s == "ccn") return Method::CCN;
    if (s == "ccn_r") return Method::CCN_R;
    if (s == "diffsim") return Method::DIFFSIM;
    if (s == "end_to_end") return Method::END_TO_END;
    throw std::invalid_argument("unknown method '" + s +
                                "' (want ccn, ccn_r, diffsim, or end_to_end)");
}

inline bool method_has_net(Method m) { return m == Method::CCN_R || m == Method::END_TO_END; }
inline bool method_is_structured(Method m) { return m != Method::END_TO_END; }

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    VecX m;  // first moment
    VecX v;  // second moment
    long t = 0;
};

// Standard adaptive-moment update with bias correction.
inline void adam_step(VecX& params, const VecX& grad, AdamState& st, const AdamConfig& cfg)
{
    if (grad.size() != params.size()) throw std::invalid_argument("adam_step: shape mismatch");
    if (st.t == 0) {
        st.m = VecX::Zero(params.size());
        st.v = VecX::Zero(params.size());
    }
    if (st.m.size() != params.size()) throw std::invalid_argument("adam_step: stale moments");
    ++st.t;
    st.m = cfg.beta1 * st.m + (1.0 - cfg.beta1) * grad;
    st.v = cfg.beta2 * st.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
    params.array() -=
        cfg.lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + cfg.eps);
}

// A trainable model: structured physical parameters, an optional network
// (residual acceleration for ccn_r, next-velocity regressor for end_to_end),
// and the input-embedding switch the end-to-end net was built with.
struct LearnedModel {
    Method method = Method::CCN;
    StructuredParams params;
    Mlp net;
    bool rotation_feature = false;

    bool has_net() const { return !net.dims.empty(); }
};

inline Json json_from_learned_model(const LearnedModel& lm)
{
    Json j;
    j["method"] = method_name(lm.method);
    j["rotation_feature"] = lm.rotation_feature;
    if (method_is_structured(lm.method)) {
        Json p;
        p["mu"] = lm.params.mu;
        Json thetas = Json::array();
        for (const Theta& t : lm.params.thetas) thetas.push_back(json_from_vecx(t));
        p["thetas"] = std::move(thetas);
        Json verts = Json::array();
        for (const auto& vs : lm.params.vertices) {
            Json body = Json::array();
            for (const Vec3& v : vs) body.push_back(json_from_vec3(v));
            verts.push_back(std::move(body));
        }
        p["vertices"] = std::move(verts);
        j["params"] = std::move(p);
    }
    if (lm.has_net()) j["net"] = json_from_mlp(lm.net);
    return j;
}

inline LearnedModel learned_model_from_json(const Json& j)
{
    require_keys(j, "learned model", {"method", "rotation_feature"}, {"params", "net"});
    LearnedModel lm;
    lm.method = method_from_string(j.at("method").get<std::string>());
    lm.rotation_feature = j.at("rotation_feature").get<bool>();
    if (method_is_structured(lm.method)) {
        const Json& p = j.at("params");
        require_keys(p, "learned params", {"mu", "thetas", "vertices"});
        lm.params.mu = p.at("mu").get<double>();
        for (const Json& t : p.at("thetas"))
            lm.params.thetas.push_back(vecx_from_json(t, "theta"));
        for (const Json& body : p.at("vertices")) {
            std::vector<Vec3> vs;
            for (const Json& v : body) vs.push_back(vec3_from_json(v, "vertex"));
            lm.params.vertices.push_back(std::move(vs));
        }
        if (lm.params.thetas.size() != lm.params.vertices.size())
            throw std::invalid_argument("learned model: body count mismatch");
    }
    if (method_has_net(lm.method)) lm.net = mlp_from_json(j.at("net"));
    return lm;
}

// Residual acceleration closure over a network snapshot (captured by value).
inline ResidualAccel residual_accel_fn(Mlp net)
{
    return [net = std::move(net)](const State& x) { return net.forward(quat_feature(x)); };
}

// Open-loop rollout of the end-to-end regressor: the network predicts the
// next generalized velocity and the configuration advances by the standard
// update.
inline Trajectory e2e_rollout(const Mlp& net, bool rotation_feature, const State& x0, int steps,
                              double dt)
{
    Trajectory t;
    t.dt = dt;
    t.states.reserve(steps + 1);
    t.states.push_back(x0);
    State x = x0;
    for (int k = 0; k < steps; ++k) {
        State nx;
        nx.v = Velocity::from_flat(net.forward(rotation_feature ? quat_feature(x) : raw_feature(x)));
        nx.q = configuration_step(x.q, nx.v, dt);
        t.states.push_back(nx);
        x = nx;
    }
    return t;
}

struct TrainConfig {
    double lr_structured = 1e-3;
    double lr_net = 1e-4;
    int batch_size = 64;
    int max_epochs = 500;
    int patience = 50;  // epochs without validation improvement before stopping
    LossWeights weights;
    std::uint64_t seed = 0;  // mandatory; epoch shuffles substream from it
    InnerConfig inner;
    StepperConfig stepper;
    FdConfig fd;

    void validate() const
    {
        if (batch_size < 1 || max_epochs < 0 || patience < 1)
            throw std::invalid_argument("train config: nonpositive counts");
        if (lr_structured <= 0.0 || lr_net <= 0.0)
            throw std::invalid_argument("train config: nonpositive learning rate");
    }
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainedModel {
    LearnedModel model;  // best-validation parameters
    std::vector<EpochRecord> history;
    double initial_val = 0.0;
    double best_val = 0.0;
    int best_epoch = 0;  // 0 means the initialization was never beaten
    int epochs_run = 0;
};

inline std::string history_csv(const TrainedModel& tm)
{
    std::string out = "epoch,train_loss,val_loss\n";
    for (const EpochRecord& r : tm.history) {
        out += std::to_string(r.epoch);
        out += ',';
        out += Json(r.train_loss).dump();
        out += ',';
        out += Json(r.val_loss).dump();
        out += '\n';
    }
    return out;
}

namespace detail {

inline void require_finite(double x, const std::string& what)
{
    if (!std::isfinite(x))
        throw std::runtime_error("train: non-finite " + what + " (" + std::to_string(x) + ")");
}

}  // namespace detail

// Minibatch first-order training of one method on pre-split transition sets.
// Friction is clamped nonnegative after every step; the best-validation
// parameters are returned; a non-finite loss or gradient aborts with a
// diagnostic naming the epoch and batch.
inline TrainedModel train(const Model& skeleton, const std::vector<TransitionSample>& train_set,
                          const std::vector<TransitionSample>& val_set,
                          const LearnedModel& init, const TrainConfig& cfg)
{
    cfg.validate();
    if (train_set.empty() || val_set.empty())
        throw std::invalid_argument("train: empty train or validation set");
    const Method method = init.method;
    if (method_has_net(method) != init.has_net())
        throw std::invalid_argument("train: method/network mismatch in the initial model");
    if (method_is_structured(method) && init.params.n_bodies() != skeleton.n_bodies())
        throw std::invalid_argument("train: initial parameters do not fit the skeleton");

    const bool violation_based = method == Method::CCN || method == Method::CCN_R;
    const int n_train = static_cast<int>(train_set.size());
    const int n_val = static_cast<int>(val_set.size());

    // Per-sample kinematic caches and inner warm starts persist across epochs.
    std::vector<SampleCache> train_cache, val_cache;
    std::vector<ContactImpulse> train_warm(train_set.size()), val_warm(val_set.size());
    if (violation_based) {
        train_cache.reserve(train_set.size());
        for (const TransitionSample& s : train_set)
            train_cache.push_back(make_sample_cache(skeleton, s));
        val_cache.reserve(val_set.size());
        for (const TransitionSample& s : val_set)
            val_cache.push_back(make_sample_cache(skeleton, s));
    }

    LearnedModel cur = init;
    const auto val_loss_of = [&](const LearnedModel& lm) {
        double total = 0.0;
        switch (method) {
            case Method::CCN:
            case Method::CCN_R:
                for (int i = 0; i < n_val; ++i) {
                    const ViolationGradient g = violation_gradient(
                        val_set[i], skeleton, lm.params, lm.has_net() ? &lm.net : nullptr,
                        cfg.weights, cfg.inner, &val_cache[i], &val_warm[i],
                        method == Method::CCN_R);
                    val_warm[i] = g.inner.lambda;
                    total += g.loss;
                }
                break;
            case Method::DIFFSIM: {
                const Model m = apply_params(skeleton, lm.params);
                for (int i = 0; i < n_val; ++i)
                    total += prediction_loss(val_set[i], m, cfg.weights, cfg.stepper,
                                             &val_warm[i], &val_warm[i]);
                break;
            }
            case Method::END_TO_END:
                for (int i = 0; i < n_val; ++i)
                    total += e2e_prediction_loss(val_set[i], lm.net, lm.rotation_feature,
                                                 cfg.weights);
                break;
        }
        return total / static_cast<double>(n_val);
    };

    TrainedModel out;
    out.initial_val = val_loss_of(cur);
    detail::require_finite(out.initial_val, "validation loss at initialization");
    out.model = cur;
    out.best_val = out.initial_val;
    out.best_epoch = 0;

    VecX x_struct;
    if (method_is_structured(method)) x_struct = cur.params.flatten();
    AdamState st_struct, st_net;
    const AdamConfig ac_struct{cfg.lr_structured, 0.9, 0.999, 1e-8};
    const AdamConfig ac_net{cfg.lr_net, 0.9, 0.999, 1e-8};

    std::vector<int> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(substream_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        for (int i = n_train - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle_rng.index(static_cast<std::uint64_t>(i) + 1));
            std::swap(order[i], order[j]);
        }

        double epoch_total = 0.0;
        for (int b0 = 0; b0 < n_train; b0 += cfg.batch_size) {
            const int bn = std::min(cfg.batch_size, n_train - b0);
            const double inv = 1.0 / static_cast<double>(bn);
            double batch_loss = 0.0;
            VecX g_struct, g_net;
            if (method_is_structured(method)) g_struct = VecX::Zero(x_struct.size());
            if (method_has_net(method)) g_net = VecX::Zero(cur.net.n_params());

            switch (method) {
                case Method::CCN:
                case Method::CCN_R:
                    for (int k = 0; k < bn; ++k) {
                        const int idx = order[b0 + k];
                        const ViolationGradient g = violation_gradient(
                            train_set[idx], skeleton, cur.params,
                            cur.has_net() ? &cur.net : nullptr, cfg.weights, cfg.inner,
                            &train_cache[idx], &train_warm[idx], method == Method::CCN_R);
                        train_warm[idx] = g.inner.lambda;
                        batch_loss += inv * g.loss;
                        g_struct += inv * g.structured.flatten();
                        if (method == Method::CCN_R) g_net += inv * g.net;
                    }
                    break;
                case Method::DIFFSIM: {
                    std::vector<TransitionSample> batch;
                    batch.reserve(bn);
                    for (int k = 0; k < bn; ++k) batch.push_back(train_set[order[b0 + k]]);
                    const PredictionGradient g = prediction_gradient_fd(
                        batch, skeleton, cur.params, cfg.weights, cfg.stepper, cfg.fd);
                    batch_loss = g.loss;
                    g_struct = g.structured.flatten();
                    break;
                }
                case Method::END_TO_END:
                    for (int k = 0; k < bn; ++k) {
                        E2eGradient g;
                        batch_loss += inv * e2e_prediction_loss(train_set[order[b0 + k]],
                                                                cur.net, cur.rotation_feature,
                                                                cfg.weights, &g);
                        g_net += inv * g.net;
                    }
                    break;
            }

            const std::string where =
                " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b0 / cfg.batch_size);
            detail::require_finite(batch_loss, "training loss" + where);
            if (g_struct.size() && !g_struct.allFinite())
                throw std::runtime_error("train: non-finite structured gradient" + where);
            if (g_net.size() && !g_net.allFinite())
                throw std::runtime_error("train: non-finite network gradient" + where);

            if (g_struct.size()) {
                adam_step(x_struct, g_struct, st_struct, ac_struct);
                x_struct[x_struct.size() - 1] = std::max(0.0, x_struct[x_struct.size() - 1]);
                cur.params.set_flat(x_struct);
            }
            if (g_net.size()) adam_step(cur.net.params, g_net, st_net, ac_net);
            epoch_total += batch_loss * bn;
        }

        const double val = val_loss_of(cur);
        detail::require_finite(val, "validation loss at epoch " + std::to_string(epoch));
        out.history.push_back(
            EpochRecord{epoch, epoch_total / static_cast<double>(n_train), val});
        out.epochs_run = epoch;
        if (val < out.best_val) {
            out.best_val = val;
            out.best_epoch = epoch;
            out.model = cur;
        }
        if (epoch - out.best_epoch >= cfg.patience) break;
    }
    return out;
}

// Two-sided 95% critical values of Student's t (0.025 upper tail).
inline double t_critical_95(int df)
{
    static const double table[30] = {
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
        2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
        2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
    if (df < 1) throw std::invalid_argument("t_critical_95: df < 1");
    return df <= 30 ? table[df - 1] : 1.96;
}

struct MeanCi {
    double mean = 0.0;
    double half_width = 0.0;  // t * s / sqrt(n)
    int n = 0;
};

inline MeanCi mean_ci(const std::vector<double>& xs)
{
    MeanCi out;
    out.n = static_cast<int>(xs.size());
    if (out.n == 0) return out;
    for (double x : xs) out.mean += x;
    out.mean /= out.n;
    if (out.n < 2) return out;
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    const double s = std::sqrt(ss / (out.n - 1));
    out.half_width = t_critical_95(out.n - 1) * s / std::sqrt(static_cast<double>(out.n));
    return out;
}

enum class SweepKind { TRAIN_SIZE, GRAVITY };

struct RunSpec {
    Scenario scenario;
    std::vector<Method> methods;
    SweepKind sweep = SweepKind::TRAIN_SIZE;
    std::vector<double> sweep_values;  // train sizes, or gravity fractions
    int n_seeds = 9;
    int n_tosses = 320;
    int train_size = 256;  // used when the sweep is not over train sizes
    std::uint64_t data_seed = 1;
    bool e2e_rotation_feature = false;
    TrainConfig train;
    VolumeConfig volume;
    bool record_timing = false;  // wall times stay 0 when off, for bit-stable tables
    int workers = 1;
};

struct ResultRow {
    std::string scenario;
    Method method = Method::CCN;
    double sweep_value = 0.0;
    int seed_index = 0;
    bool success = false;
    std::string error;
    MetricReport metrics;
    double initial_val = 0.0;
    double final_val = 0.0;
    int epochs = 0;
    double wall_seconds = 0.0;
};

// Full metric evaluation of a trained model on held-out trajectories.
// Structured methods materialize the skeleton and compare parameters;
// unstructured ones only replay, with NaN parameter metrics.
inline MetricReport learned_model_metrics(const LearnedModel& lm, const Model& skeleton,
                                          const Model& truth,
                                          const std::vector<Trajectory>& tests,
                                          const StepperConfig& stepper,
                                          const VolumeConfig& volume)
{
    MetricReport r;
    if (method_is_structured(lm.method)) {
        const Model learned = apply_params(skeleton, lm.params);
        std::optional<ResidualAccel> res;
        if (lm.has_net()) res.emplace(residual_accel_fn(lm.net));
        return evaluate_metrics(learned, truth, tests, stepper, res ? &*res : nullptr, volume);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.e_volume = nan;
    r.e_friction = nan;
    r.e_inertia = nan;
    const TrajErrorReport t =
        traj_errors_fn(truth, tests, [&](const State& x0, int steps, double dt) {
            return e2e_rollout(lm.net, lm.rotation_feature, x0, steps, dt);
        });
    r.traj_pos_error = t.pos_error;
    r.traj_rot_error = t.rot_error;
    r.n_rollout_failures = t.n_failed;
    r.per_traj_pos = t.per_traj_pos;
    r.per_traj_rot = t.per_traj_rot;
    return r;
}

namespace detail {

// Learner initialization for one cell. Draw order: structured parameters
// first, then the network, so structured draws agree across methods at the
// same seed index. Gravity sweeps rescale only the believed gravitational
// constant.
inline LearnedModel initial_model(const Model& truth, Method method, bool e2e_rotation,
                                  Rng& rng)
{
    LearnedModel lm;
    lm.method = method;
    if (method_is_structured(method)) lm.params = sample_initial_parameters(truth, rng);
    if (method == Method::CCN_R) lm.net = make_residual_net(truth.n_joints(), rng);
    if (method == Method::END_TO_END) {
        lm.rotation_feature = e2e_rotation;
        lm.net = make_end_to_end_net(truth.n_joints(), rng, e2e_rotation);
    }
    return lm;
}

}  // namespace detail

// One experiment cell end to end: split, initialize, train, evaluate.
// Exposed so the CLI can run single cells; run_experiment loops it.
inline ResultRow run_cell(const RunSpec& spec, const Dataset& data, const Model& truth,
                          int value_index, int method_index, int seed_index,
                          TrainedModel* trained_out = nullptr,
                          std::vector<int>* test_ids_out = nullptr)
{
    const Method method = spec.methods[method_index];
    const double sv = spec.sweep_values[value_index];
    ResultRow row;
    row.scenario = spec.scenario.name;
    row.method = method;
    row.sweep_value = sv;
    row.seed_index = seed_index;

    const auto t0 = std::chrono::steady_clock::now();
    try {
        const int train_size =
            spec.sweep == SweepKind::TRAIN_SIZE ? static_cast<int>(sv) : spec.train_size;
        // Splits are shared across methods at a (sweep value, seed) point.
        Rng split_rng(substream_seed(substream_seed(spec.data_seed, 0xdea1),
                                     static_cast<std::uint64_t>(value_index) * 1009 +
                                         static_cast<std::uint64_t>(seed_index)));
        const DataSplit split = split_dataset(data, train_size, split_rng);

        Model skeleton = truth;
        if (spec.sweep == SweepKind::GRAVITY) skeleton.gravity *= sv;

        Rng init_rng(substream_seed(spec.train.seed, static_cast<std::uint64_t>(seed_index)));
        const LearnedModel init =
            detail::initial_model(skeleton, method, spec.e2e_rotation_feature, init_rng);

        TrainConfig tc = spec.train;
        tc.seed = substream_seed(
            spec.train.seed,
            0xce11u + (static_cast<std::uint64_t>(value_index) * spec.methods.size() +
                       static_cast<std::uint64_t>(method_index)) *
                          1000003ull +
                static_cast<std::uint64_t>(seed_index));
        const TrainedModel tm = train(skeleton, split.train, split.validation, init, tc);

        std::vector<Trajectory> tests;
        tests.reserve(split.test_ids.size());
        for (int id : split.test_ids) tests.push_back(data.trajectories[id]);
        if (test_ids_out != nullptr) *test_ids_out = split.test_ids;

        row.metrics =
            learned_model_metrics(tm.model, skeleton, truth, tests, tc.stepper, spec.volume);
        row.initial_val = tm.initial_val;
        row.final_val = tm.best_val;
        row.epochs = tm.epochs_run;
        row.success = true;
        if (trained_out != nullptr) *trained_out = tm;
    } catch (const std::exception& e) {
        row.success = false;
        row.error = e.what();
    }
    if (spec.record_timing) {
        row.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return row;
}

// All cells of a sweep. Rows come back in deterministic (sweep value, method,
// seed) order regardless of worker scheduling; per-cell failures are recorded
// in their row and do not stop the run.
inline std::vector<ResultRow> run_experiment(const RunSpec& spec, const Dataset* data = nullptr)
{
    if (spec.methods.empty() || spec.sweep_values.empty() || spec.n_seeds < 1)
        throw std::invalid_argument("run_experiment: empty methods, sweep, or seeds");
    Dataset local;
    if (data == nullptr) {
        local = generate_dataset(spec.scenario, spec.n_tosses, spec.data_seed);
        data = &local;
    }
    const Model truth = spec.scenario.true_model();

    const int nv = static_cast<int>(spec.sweep_values.size());
    const int nm = static_cast<int>(spec.methods.size());
    const int cells = nv * nm * spec.n_seeds;
    std::vector<ResultRow> rows(cells);

    std::atomic<int> next{0};
    const auto worker = [&] {
        for (int c = next.fetch_add(1); c < cells; c = next.fetch_add(1)) {
            const int vi = c / (nm * spec.n_seeds);
            const int mi = (c / spec.n_seeds) % nm;
            const int si = c % spec.n_seeds;
            rows[c] = run_cell(spec, *data, truth, vi, mi, si);
        }
    };
    const int n_workers = std::max(1, std::min(spec.workers, cells));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    return rows;
}

namespace detail {

inline std::string csv_double(double v)
{
    if (std::isnan(v)) return "nan";
    return Json(v).dump();
}

inline std::string csv_sanitize(std::string s)
{
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

}  // namespace detail

// One row per cell: the fixed column schema consumed by external plotting.
inline std::string results_table_csv(const std::vector<ResultRow>& rows)
{
    std::string out =
        "scenario,method,sweep_value,seed,success,e_volume,e_friction,e_inertia,"
        "traj_pos_error,traj_rot_error,rollout_failures,initial_val,final_val,epochs,"
        "wall_seconds,error\n";
    for (const ResultRow& r : rows) {
        out += r.scenario;
        out += ',';
        out += method_name(r.method);
        out += ',';
        out += detail::csv_double(r.sweep_value);
        out += ',';
        out += std::to_string(r.seed_index);
        out += ',';
        out += r.success ? "1" : "0";
        out += ',';
        out += detail::csv_double(r.metrics.e_volume);
        out += ',';
        out += detail::csv_double(r.metrics.e_friction);
        out += ',';
        out += detail::csv_double(r.metrics.e_inertia);
        out += ',';
        out += detail::csv_double(r.metrics.traj_pos_error);
        out += ',';
        out += detail::csv_double(r.metrics.traj_rot_error);
        out += ',';
        out += std::to_string(r.metrics.n_rollout_failures);
        out += ',';
        out += detail::csv_double(r.initial_val);
        out += ',';
        out += detail::csv_double(r.final_val);
        out += ',';
        out += std::to_string(r.epochs);
        out += ',';
        out += detail::csv_double(r.wall_seconds);
        out += ',';
        out += detail::csv_sanitize(r.error);
        out += '\n';
    }
    return out;
}

// Per-(method, sweep value) aggregation over seeds: mean and 95% t-score
// confidence half-width for every metric, successful rows only.
inline std::string summary_table_csv(const std::vector<ResultRow>& rows)
{
    std::string out =
        "scenario,method,sweep_value,n,e_volume_mean,e_volume_ci,e_friction_mean,"
        "e_friction_ci,e_inertia_mean,e_inertia_ci,traj_pos_mean,traj_pos_ci,"
        "traj_rot_mean,traj_rot_ci\n";
    std::vector<std::pair<Method, double>> groups;
    for (const ResultRow& r : rows) {
        const std::pair<Method, double> key{r.method, r.sweep_value};
        if (std::find(groups.begin(), groups.end(), key) == groups.end())
            groups.push_back(key);
    }
    for (const auto& [method, value] : groups) {
        std::vector<double> ev, ef, ei, tp, tr;
        std::string scenario;
        for (const ResultRow& r : rows) {
            if (r.method != method || r.sweep_value != value || !r.success) continue;
            scenario = r.scenario;
            ev.push_back(r.metrics.e_volume);
            ef.push_back(r.metrics.e_friction);
            ei.push_back(r.metrics.e_inertia);
            tp.push_back(r.metrics.traj_pos_error);
            tr.push_back(r.metrics.traj_rot_error);
        }
        const MeanCi mv = mean_ci(ev), mf = mean_ci(ef), mi = mean_ci(ei), mp = mean_ci(tp),
                     mr = mean_ci(tr);
        out += scenario;
        out += ',';
        out += method_name(method);
        out += ',';
        out += detail::csv_double(value);
        out += ',';
        out += std::to_string(mv.n);
        for (const MeanCi& m : {mv, mf, mi, mp, mr}) {
            out += ',';
            out += detail::csv_double(m.mean);
            out += ',';
            out += detail::csv_double(m.half_width);
        }
        out += '\n';
    }
    return out;
}

}  // namespace cisid
