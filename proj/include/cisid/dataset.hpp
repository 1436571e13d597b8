#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "io_util.hpp"
#include "json_util.hpp"
#include "rng.hpp"
#include "scenario.hpp"
#include "state.hpp"

// Line-delimited dataset files and trajectory-level train/val/test splits.
//
// File layout: the first line is a header object (schema version, scenario,
// dt, steps, model hash, seed, trajectory count); each further line is one
// trajectory with per-state flat q and v arrays. Doubles print in shortest
// round-trip form and object keys sort alphabetically, so
// write -> read -> write reproduces the file byte for byte.

namespace cisid {

inline constexpr const char* kDatasetSchema = "dataset-v1";

inline std::string dataset_text(const Dataset& ds)
{
    Json header;
    header["schema"] = kDatasetSchema;
    header["scenario"] = ds.scenario;
    header["dt"] = ds.dt;
    header["steps"] = ds.steps;
    header["model_hash"] = ds.model_hash;
    header["seed"] = ds.seed;
    header["n_trajectories"] = ds.n_trajectories();

    std::string out = header.dump();
    out += '\n';

    const int n_states = ds.steps + 1;
    for (const Trajectory& t : ds.trajectories) {
        if (t.dt != ds.dt)
            throw std::runtime_error("dataset: trajectory dt differs from header dt");
        if (static_cast<int>(t.states.size()) != n_states)
            throw std::runtime_error("dataset: trajectory length differs from header steps");
        Json rec;
        rec["contact_events"] = t.contact_events;
        Json q = Json::array();
        Json v = Json::array();
        for (const State& s : t.states) {
            const VecX qf = s.q.flat();
            const VecX vf = s.v.flat();
            if (!qf.allFinite() || !vf.allFinite())
                throw std::runtime_error("dataset: non-finite state");
            q.push_back(json_from_vecx(qf));
            v.push_back(json_from_vecx(vf));
        }
        rec["q"] = std::move(q);
        rec["v"] = std::move(v);
        out += rec.dump();
        out += '\n';
    }
    return out;
}

inline Dataset dataset_from_text(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset: empty file");

    Json header;
    try {
        header = Json::parse(line);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("dataset header: ") + e.what());
    }
    require_keys(header, "dataset header",
                 {"schema", "scenario", "dt", "steps", "model_hash", "seed", "n_trajectories"});
    if (header.at("schema").get<std::string>() != kDatasetSchema)
        throw std::runtime_error("dataset: unsupported schema '" +
                                 header.at("schema").get<std::string>() + "'");

    Dataset ds;
    ds.scenario = header.at("scenario").get<std::string>();
    ds.dt = header.at("dt").get<double>();
    ds.steps = header.at("steps").get<int>();
    ds.model_hash = header.at("model_hash").get<std::string>();
    ds.seed = header.at("seed").get<std::uint64_t>();
    const int n_traj = header.at("n_trajectories").get<int>();
    if (ds.steps < 1 || ds.dt <= 0.0 || n_traj < 0)
        throw std::runtime_error("dataset: invalid header values");

    const int n_states = ds.steps + 1;
    int nq = -1;  // flat configuration width, fixed across the whole file
    ds.trajectories.reserve(n_traj);
    for (int i = 0; i < n_traj; ++i) {
        if (!std::getline(in, line))
            throw std::runtime_error("dataset: truncated file (missing trajectory records)");
        Json rec;
        try {
            rec = Json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error("dataset trajectory " + std::to_string(i) + ": " + e.what());
        }
        require_keys(rec, "dataset trajectory", {"contact_events", "q", "v"});
        Trajectory t;
        t.dt = ds.dt;
        t.contact_events = rec.at("contact_events").get<int>();
        if (t.contact_events < 0)
            throw std::runtime_error("dataset: negative contact_events");
        const Json& q = rec.at("q");
        const Json& v = rec.at("v");
        if (!q.is_array() || !v.is_array() || static_cast<int>(q.size()) != n_states ||
            static_cast<int>(v.size()) != n_states)
            throw std::runtime_error("dataset: trajectory state count differs from header steps");
        t.states.resize(n_states);
        for (int k = 0; k < n_states; ++k) {
            const VecX qf = vecx_from_json(q[k], "dataset q row");
            const VecX vf = vecx_from_json(v[k], "dataset v row");
            if (nq < 0) {
                if (qf.size() < 7) throw std::runtime_error("dataset: configuration too short");
                nq = static_cast<int>(qf.size());
            }
            if (qf.size() != nq || vf.size() != nq - 1)
                throw std::runtime_error("dataset: inconsistent state dimensions");
            t.states[k].q = Configuration::from_flat(qf);
            t.states[k].v = Velocity::from_flat(vf);
            if (!t.states[k].q.valid(1e-6))
                throw std::runtime_error("dataset: invalid configuration");
        }
        ds.trajectories.push_back(std::move(t));
    }
    if (std::getline(in, line) && !line.empty())
        throw std::runtime_error("dataset: trailing data after last trajectory");
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path)
{
    write_text_atomic(path, dataset_text(ds));
}

inline Dataset load_dataset(const std::string& path)
{
    std::string text = read_text_file(path);
    try {
        return dataset_from_text(text);
    } catch (const std::exception& e) {
        throw std::runtime_error("dataset file " + path + ": " + e.what());
    }
}

struct DataSplit {
    std::vector<TransitionSample> train;
    std::vector<TransitionSample> validation;
    std::vector<TransitionSample> test;
    // Trajectory indices into the source dataset, ascending within each split;
    // rollout metrics evaluate on the test trajectories, not the transitions.
    std::vector<int> train_ids;
    std::vector<int> validation_ids;
    std::vector<int> test_ids;
};

namespace detail {

inline void append_transitions(const Dataset& ds, const std::vector<int>& ids,
                               std::vector<TransitionSample>& out)
{
    for (int id : ids) {
        const std::vector<TransitionSample> tr = trajectory_transitions(ds.trajectories[id]);
        out.insert(out.end(), tr.begin(), tr.end());
    }
}

}  // namespace detail

// Splits whole trajectories, never single transitions, so near-duplicate
// consecutive transitions cannot leak across splits. The remainder after
// train_size is halved between validation and test (test gets the odd one).
inline DataSplit split_dataset(const Dataset& ds, int train_size, Rng& rng)
{
    const int n = ds.n_trajectories();
    if (train_size < 1 || n - train_size < 2)
        throw std::invalid_argument(
            "split_dataset: need train_size >= 1 and at least two spare trajectories");

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.index(static_cast<std::uint64_t>(i) + 1));
        std::swap(perm[i], perm[j]);
    }

    const int n_val = (n - train_size) / 2;
    DataSplit out;
    out.train_ids.assign(perm.begin(), perm.begin() + train_size);
    out.validation_ids.assign(perm.begin() + train_size, perm.begin() + train_size + n_val);
    out.test_ids.assign(perm.begin() + train_size + n_val, perm.end());
    std::sort(out.train_ids.begin(), out.train_ids.end());
    std::sort(out.validation_ids.begin(), out.validation_ids.end());
    std::sort(out.test_ids.begin(), out.test_ids.end());
    detail::append_transitions(ds, out.train_ids, out.train);
    detail::append_transitions(ds, out.validation_ids, out.validation);
    detail::append_transitions(ds, out.test_ids, out.test);
    return out;
}

}  // namespace cisid
