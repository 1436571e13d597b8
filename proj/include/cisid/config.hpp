#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "io_util.hpp"
#include "json_util.hpp"
#include "training.hpp"

// Experiment configuration file: strict schema (unknown keys rejected), every
// field defaulted, and a canonical serialization that materializes all keys
// so the config hash covers the complete effective configuration.

namespace cisid {

// Accepts the hyphenated spellings used on the command line ("ccn-r").
inline Method method_from_cli(std::string s)
{
    std::replace(s.begin(), s.end(), '-', '_');
    return method_from_string(s);
}

inline Json json_from_loss_weights(const LossWeights& w)
{
    Json j;
    j["w_comp"] = w.w_comp;
    j["w_diss"] = w.w_diss;
    j["w_pen"] = w.w_pen;
    j["w_pred"] = w.w_pred;
    j["w_res"] = w.w_res;
    j["w_res_w"] = w.w_res_w;
    j["rotation_weight"] = w.rotation_weight;
    return j;
}

inline LossWeights loss_weights_from_json(const Json& j)
{
    require_keys(j, "loss weights", {},
                 {"w_comp", "w_diss", "w_pen", "w_pred", "w_res", "w_res_w", "rotation_weight"});
    LossWeights w;
    if (j.contains("w_comp")) w.w_comp = j.at("w_comp").get<double>();
    if (j.contains("w_diss")) w.w_diss = j.at("w_diss").get<double>();
    if (j.contains("w_pen")) w.w_pen = j.at("w_pen").get<double>();
    if (j.contains("w_pred")) w.w_pred = j.at("w_pred").get<double>();
    if (j.contains("w_res")) w.w_res = j.at("w_res").get<double>();
    if (j.contains("w_res_w")) w.w_res_w = j.at("w_res_w").get<double>();
    if (j.contains("rotation_weight")) w.rotation_weight = j.at("rotation_weight").get<double>();
    return w;
}

inline Json json_from_stepper_config(const StepperConfig& c)
{
    Json j;
    j["regularization"] = c.regularization;
    j["stabilization"] = c.stabilization;
    j["gap_correction_passes"] = c.gap_correction_passes;
    j["qp_tol"] = c.qp.tol;
    j["qp_max_iterations"] = c.qp.max_iterations;
    return j;
}

inline StepperConfig stepper_config_from_json(const Json& j)
{
    require_keys(j, "stepper config", {},
                 {"regularization", "stabilization", "gap_correction_passes", "qp_tol",
                  "qp_max_iterations"});
    StepperConfig c;
    if (j.contains("regularization")) c.regularization = j.at("regularization").get<double>();
    if (j.contains("stabilization")) c.stabilization = j.at("stabilization").get<double>();
    if (j.contains("gap_correction_passes"))
        c.gap_correction_passes = j.at("gap_correction_passes").get<int>();
    if (j.contains("qp_tol")) c.qp.tol = j.at("qp_tol").get<double>();
    if (j.contains("qp_max_iterations"))
        c.qp.max_iterations = j.at("qp_max_iterations").get<int>();
    return c;
}

inline Json json_from_train_config(const TrainConfig& c)
{
    Json j;
    j["lr_structured"] = c.lr_structured;
    j["lr_net"] = c.lr_net;
    j["batch_size"] = c.batch_size;
    j["max_epochs"] = c.max_epochs;
    j["patience"] = c.patience;
    j["seed"] = c.seed;
    j["weights"] = json_from_loss_weights(c.weights);
    j["inner_tol"] = c.inner.qp.tol;
    j["inner_max_iterations"] = c.inner.qp.max_iterations;
    j["stepper"] = json_from_stepper_config(c.stepper);
    j["fd_step"] = c.fd.step;
    j["fd_max_params"] = c.fd.max_params;
    return j;
}

inline TrainConfig train_config_from_json(const Json& j)
{
    require_keys(j, "train config", {},
                 {"lr_structured", "lr_net", "batch_size", "max_epochs", "patience", "seed",
                  "weights", "inner_tol", "inner_max_iterations", "stepper", "fd_step",
                  "fd_max_params"});
    TrainConfig c;
    if (j.contains("lr_structured")) c.lr_structured = j.at("lr_structured").get<double>();
    if (j.contains("lr_net")) c.lr_net = j.at("lr_net").get<double>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("max_epochs")) c.max_epochs = j.at("max_epochs").get<int>();
    if (j.contains("patience")) c.patience = j.at("patience").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("weights")) c.weights = loss_weights_from_json(j.at("weights"));
    if (j.contains("inner_tol")) c.inner.qp.tol = j.at("inner_tol").get<double>();
    if (j.contains("inner_max_iterations"))
        c.inner.qp.max_iterations = j.at("inner_max_iterations").get<int>();
    if (j.contains("stepper")) c.stepper = stepper_config_from_json(j.at("stepper"));
    if (j.contains("fd_step")) c.fd.step = j.at("fd_step").get<double>();
    if (j.contains("fd_max_params")) c.fd.max_params = j.at("fd_max_params").get<int>();
    c.validate();
    return c;
}

struct ExperimentConfig {
    std::string scenario = "cube_toss";
    std::vector<Method> methods = {Method::CCN};
    SweepKind sweep = SweepKind::TRAIN_SIZE;
    std::vector<double> sweep_values = {256.0};
    int n_seeds = 9;
    int n_tosses = 320;
    int train_size = 256;  // the split used when the sweep is over gravity
    std::uint64_t data_seed = 1;
    bool e2e_rotation_feature = false;
    TrainConfig train;
    VolumeConfig volume;
    bool record_timing = false;
    int workers = 0;  // 0 picks the logical core count at run time
    std::string out_dir = "out";
    std::string dataset;  // optional pregenerated dataset path; empty generates

    RunSpec to_run_spec() const
    {
        RunSpec s;
        s.scenario = make_scenario(scenario);
        s.methods = methods;
        s.sweep = sweep;
        s.sweep_values = sweep_values;
        s.n_seeds = n_seeds;
        s.n_tosses = n_tosses;
        s.train_size = train_size;
        s.data_seed = data_seed;
        s.e2e_rotation_feature = e2e_rotation_feature;
        s.train = train;
        s.volume = volume;
        s.record_timing = record_timing;
        s.workers = workers > 0
                        ? workers
                        : std::max(1u, std::thread::hardware_concurrency());
        return s;
    }
};

inline const char* sweep_kind_name(SweepKind k)
{
    return k == SweepKind::TRAIN_SIZE ? "train_size" : "gravity";
}

inline SweepKind sweep_kind_from_string(const std::string& s)
{
    if (s == "train_size") return SweepKind::TRAIN_SIZE;
    if (s == "gravity") return SweepKind::GRAVITY;
    throw std::invalid_argument("unknown sweep kind '" + s + "' (want train_size or gravity)");
}

// Canonical form: every key present, methods in configured order.
inline Json json_from_experiment_config(const ExperimentConfig& c)
{
    Json j;
    j["scenario"] = c.scenario;
    Json methods = Json::array();
    for (Method m : c.methods) methods.push_back(method_name(m));
    j["methods"] = std::move(methods);
    j["sweep"] = sweep_kind_name(c.sweep);
    j["sweep_values"] = c.sweep_values;
    j["n_seeds"] = c.n_seeds;
    j["n_tosses"] = c.n_tosses;
    j["train_size"] = c.train_size;
    j["data_seed"] = c.data_seed;
    j["e2e_rotation_feature"] = c.e2e_rotation_feature;
    j["train"] = json_from_train_config(c.train);
    j["volume_samples"] = c.volume.samples;
    j["volume_seed"] = c.volume.seed;
    j["record_timing"] = c.record_timing;
    j["workers"] = c.workers;
    j["out_dir"] = c.out_dir;
    j["dataset"] = c.dataset;
    return j;
}

inline ExperimentConfig experiment_config_from_json(const Json& j)
{
    require_keys(j, "experiment config", {},
                 {"scenario", "methods", "sweep", "sweep_values", "n_seeds", "n_tosses",
                  "train_size", "data_seed", "e2e_rotation_feature", "train", "volume_samples",
                  "volume_seed", "record_timing", "workers", "out_dir", "dataset"});
    ExperimentConfig c;
    if (j.contains("scenario")) c.scenario = j.at("scenario").get<std::string>();
    if (j.contains("methods")) {
        c.methods.clear();
        for (const Json& m : j.at("methods"))
            c.methods.push_back(method_from_cli(m.get<std::string>()));
        if (c.methods.empty()) throw std::invalid_argument("experiment config: empty methods");
    }
    if (j.contains("sweep")) c.sweep = sweep_kind_from_string(j.at("sweep").get<std::string>());
    if (j.contains("sweep_values")) {
        c.sweep_values = j.at("sweep_values").get<std::vector<double>>();
        if (c.sweep_values.empty())
            throw std::invalid_argument("experiment config: empty sweep_values");
    }
    if (j.contains("n_seeds")) c.n_seeds = j.at("n_seeds").get<int>();
    if (j.contains("n_tosses")) c.n_tosses = j.at("n_tosses").get<int>();
    if (j.contains("train_size")) c.train_size = j.at("train_size").get<int>();
    if (j.contains("data_seed")) c.data_seed = j.at("data_seed").get<std::uint64_t>();
    if (j.contains("e2e_rotation_feature"))
        c.e2e_rotation_feature = j.at("e2e_rotation_feature").get<bool>();
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("volume_samples")) c.volume.samples = j.at("volume_samples").get<std::int64_t>();
    if (j.contains("volume_seed")) c.volume.seed = j.at("volume_seed").get<std::uint64_t>();
    if (j.contains("record_timing")) c.record_timing = j.at("record_timing").get<bool>();
    if (j.contains("workers")) c.workers = j.at("workers").get<int>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
    if (c.n_seeds < 1 || c.n_tosses < 1)
        throw std::invalid_argument("experiment config: n_seeds and n_tosses must be positive");
    make_scenario(c.scenario);  // reject unknown scenario names at parse time
    return c;
}

// Identity of the complete effective configuration; anything that changes
// results changes the hash. Output paths and worker counts are excluded so
// relocating or parallelizing a run can reuse its cache.
inline std::string config_hash(const ExperimentConfig& c)
{
    Json j = json_from_experiment_config(c);
    j.erase("out_dir");
    j.erase("workers");
    j.erase("dataset");
    j.erase("record_timing");
    return hash_hex(fnv1a(j.dump()));
}

inline ExperimentConfig load_experiment_config(const std::string& path)
{
    Json j;
    try {
        j = Json::parse(read_text_file(path));
    } catch (const std::exception& e) {
        throw std::runtime_error("config file " + path + ": " + e.what());
    }
    try {
        return experiment_config_from_json(j);
    } catch (const std::exception& e) {
        throw std::runtime_error("config file " + path + ": " + e.what());
    }
}

}  // namespace cisid
