#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "dataset.hpp"
#include "io_util.hpp"
#include "training.hpp"

// Batch experiment front end. Subcommands: gen-data, train, eval, sweep,
// inspect. Exit codes: 0 success, 1 usage error, 2 runtime failure. Every
// artifact is written atomically (temp file + rename), so an interrupted run
// never leaves a torn file, and sweeps resume from a per-cell cache keyed by
// the config hash.

namespace cisid {

inline constexpr const char* kCheckpointSchema = "checkpoint-v1";

// NaN is not representable in JSON; null stands in for it.
inline Json json_nanable(double v) { return std::isnan(v) ? Json() : Json(v); }
inline double double_nanable(const Json& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline Json json_from_result_row(const ResultRow& r)
{
    Json m;
    m["e_volume"] = json_nanable(r.metrics.e_volume);
    m["e_friction"] = json_nanable(r.metrics.e_friction);
    m["e_inertia"] = json_nanable(r.metrics.e_inertia);
    m["traj_pos_error"] = json_nanable(r.metrics.traj_pos_error);
    m["traj_rot_error"] = json_nanable(r.metrics.traj_rot_error);
    m["n_rollout_failures"] = r.metrics.n_rollout_failures;
    m["per_traj_pos"] = r.metrics.per_traj_pos;
    m["per_traj_rot"] = r.metrics.per_traj_rot;
    Json j;
    j["scenario"] = r.scenario;
    j["method"] = method_name(r.method);
    j["sweep_value"] = r.sweep_value;
    j["seed_index"] = r.seed_index;
    j["success"] = r.success;
    j["error"] = r.error;
    j["metrics"] = std::move(m);
    j["initial_val"] = json_nanable(r.initial_val);
    j["final_val"] = json_nanable(r.final_val);
    j["epochs"] = r.epochs;
    j["wall_seconds"] = r.wall_seconds;
    return j;
}

inline ResultRow result_row_from_json(const Json& j)
{
    require_keys(j, "result row",
                 {"scenario", "method", "sweep_value", "seed_index", "success", "error",
                  "metrics", "initial_val", "final_val", "epochs", "wall_seconds"});
    const Json& m = j.at("metrics");
    require_keys(m, "result metrics",
                 {"e_volume", "e_friction", "e_inertia", "traj_pos_error", "traj_rot_error",
                  "n_rollout_failures", "per_traj_pos", "per_traj_rot"});
    ResultRow r;
    r.scenario = j.at("scenario").get<std::string>();
    r.method = method_from_string(j.at("method").get<std::string>());
    r.sweep_value = j.at("sweep_value").get<double>();
    r.seed_index = j.at("seed_index").get<int>();
    r.success = j.at("success").get<bool>();
    r.error = j.at("error").get<std::string>();
    r.metrics.e_volume = double_nanable(m.at("e_volume"));
    r.metrics.e_friction = double_nanable(m.at("e_friction"));
    r.metrics.e_inertia = double_nanable(m.at("e_inertia"));
    r.metrics.traj_pos_error = double_nanable(m.at("traj_pos_error"));
    r.metrics.traj_rot_error = double_nanable(m.at("traj_rot_error"));
    r.metrics.n_rollout_failures = m.at("n_rollout_failures").get<int>();
    r.metrics.per_traj_pos = m.at("per_traj_pos").get<std::vector<double>>();
    r.metrics.per_traj_rot = m.at("per_traj_rot").get<std::vector<double>>();
    r.initial_val = double_nanable(j.at("initial_val"));
    r.final_val = double_nanable(j.at("final_val"));
    r.epochs = j.at("epochs").get<int>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    return r;
}

// A trained model plus everything needed to reproduce its evaluation:
// scenario identity, believed-gravity scale, the exact held-out trajectory
// ids, and the provenance hash of the producing configuration.
struct Checkpoint {
    LearnedModel model;
    std::string scenario;
    std::string config_hash;
    double gravity_scale = 1.0;
    std::uint64_t data_seed = 0;
    int seed_index = 0;
    std::vector<int> test_ids;
    double initial_val = 0.0;
    double best_val = 0.0;
    int best_epoch = 0;
    int epochs = 0;
};

inline Json json_from_checkpoint(const Checkpoint& c)
{
    Json j;
    j["schema"] = kCheckpointSchema;
    j["model"] = json_from_learned_model(c.model);
    j["scenario"] = c.scenario;
    j["config_hash"] = c.config_hash;
    j["gravity_scale"] = c.gravity_scale;
    j["data_seed"] = c.data_seed;
    j["seed_index"] = c.seed_index;
    j["test_ids"] = c.test_ids;
    j["initial_val"] = json_nanable(c.initial_val);
    j["best_val"] = json_nanable(c.best_val);
    j["best_epoch"] = c.best_epoch;
    j["epochs"] = c.epochs;
    return j;
}

inline Checkpoint checkpoint_from_json(const Json& j)
{
    require_keys(j, "checkpoint",
                 {"schema", "model", "scenario", "config_hash", "gravity_scale", "data_seed",
                  "seed_index", "test_ids", "initial_val", "best_val", "best_epoch", "epochs"});
    if (j.at("schema").get<std::string>() != kCheckpointSchema)
        throw std::invalid_argument("checkpoint: unsupported schema '" +
                                    j.at("schema").get<std::string>() + "'");
    Checkpoint c;
    c.model = learned_model_from_json(j.at("model"));
    c.scenario = j.at("scenario").get<std::string>();
    c.config_hash = j.at("config_hash").get<std::string>();
    c.gravity_scale = j.at("gravity_scale").get<double>();
    c.data_seed = j.at("data_seed").get<std::uint64_t>();
    c.seed_index = j.at("seed_index").get<int>();
    c.test_ids = j.at("test_ids").get<std::vector<int>>();
    c.initial_val = double_nanable(j.at("initial_val"));
    c.best_val = double_nanable(j.at("best_val"));
    c.best_epoch = j.at("best_epoch").get<int>();
    c.epochs = j.at("epochs").get<int>();
    return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path)
{
    write_text_atomic(path, json_from_checkpoint(c).dump(2) + "\n");
}

inline Checkpoint load_checkpoint(const std::string& path)
{
    try {
        return checkpoint_from_json(Json::parse(read_text_file(path)));
    } catch (const std::exception& e) {
        throw std::runtime_error("checkpoint " + path + ": " + e.what());
    }
}

namespace cli_detail {

// The dataset a command consumes must be the one its config describes.
inline void require_dataset_match(const Dataset& ds, const ExperimentConfig& cfg)
{
    const Scenario sc = make_scenario(cfg.scenario);
    if (ds.scenario != cfg.scenario)
        throw std::runtime_error("dataset scenario '" + ds.scenario +
                                 "' does not match config scenario '" + cfg.scenario + "'");
    if (ds.model_hash != model_hash(sc.true_model()))
        throw std::runtime_error("dataset model hash does not match the config scenario model");
    if (ds.dt != sc.dt || ds.steps != sc.steps)
        throw std::runtime_error("dataset step geometry does not match the scenario");
    if (ds.seed != cfg.data_seed)
        throw std::runtime_error("dataset seed " + std::to_string(ds.seed) +
                                 " does not match config data_seed " +
                                 std::to_string(cfg.data_seed));
    if (ds.n_trajectories() < cfg.n_tosses)
        throw std::runtime_error("dataset holds " + std::to_string(ds.n_trajectories()) +
                                 " tosses, config needs " + std::to_string(cfg.n_tosses));
}

inline Dataset obtain_dataset(const ExperimentConfig& cfg, const std::string& dataset_flag)
{
    const std::string path = !dataset_flag.empty() ? dataset_flag : cfg.dataset;
    if (!path.empty()) {
        Dataset ds = load_dataset(path);
        require_dataset_match(ds, cfg);
        return ds;
    }
    return generate_dataset(make_scenario(cfg.scenario), cfg.n_tosses, cfg.data_seed);
}

// Precedence: explicit flag, then the environment override, then the config.
inline std::string resolve_out_dir(const ExperimentConfig& cfg, const std::string& flag)
{
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("CISID_OUT_DIR"); env != nullptr && *env != '\0')
        return env;
    return cfg.out_dir;
}

inline void ensure_dir(const std::string& dir)
{
    std::filesystem::create_directories(dir);
}

inline long total_contact_events(const Dataset& ds)
{
    long total = 0;
    for (const Trajectory& t : ds.trajectories) total += t.contact_events;
    return total;
}

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string dataset;
};

inline int cmd_gen_data(const CommonFlags& common, const std::string& out_file,
                        std::optional<std::uint64_t> seed, std::optional<int> tosses)
{
    ExperimentConfig cfg = load_experiment_config(common.config_path);
    if (seed) cfg.data_seed = *seed;
    if (tosses) cfg.n_tosses = *tosses;
    const std::string out_dir = resolve_out_dir(cfg, common.out_dir);
    const Scenario sc = make_scenario(cfg.scenario);
    const Dataset ds = generate_dataset(sc, cfg.n_tosses, cfg.data_seed);

    std::string path = out_file;
    if (path.empty()) {
        ensure_dir(out_dir);
        path = out_dir + "/" + cfg.scenario + ".jsonl";
    } else if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
        ensure_dir(parent.string());
    }
    save_dataset(ds, path);

    const long contacts = total_contact_events(ds);
    std::cout << "wrote " << path << "\n"
              << "scenario " << ds.scenario << ", " << ds.n_trajectories() << " tosses x "
              << ds.steps << " steps, dt " << ds.dt << "\n"
              << "model hash " << ds.model_hash << ", data seed " << ds.seed << "\n"
              << "contact events: " << contacts << " total, "
              << static_cast<double>(contacts) / ds.n_trajectories() << " per toss\n"
              << "config hash " << config_hash(cfg) << "\n";
    return 0;
}

inline int cmd_train(const CommonFlags& common, const std::string& method_str, int seed_index,
                     std::optional<double> sweep_value)
{
    ExperimentConfig cfg = load_experiment_config(common.config_path);
    const Method method = method_from_cli(method_str);
    const std::string out_dir = resolve_out_dir(cfg, common.out_dir);
    const Dataset data = obtain_dataset(cfg, common.dataset);

    RunSpec spec = cfg.to_run_spec();
    spec.methods = {method};
    double value = spec.sweep == SweepKind::TRAIN_SIZE
                       ? static_cast<double>(cfg.train_size)
                       : 1.0;  // single runs believe the true gravity by default
    if (sweep_value) value = *sweep_value;
    spec.sweep_values = {value};

    const Model truth = spec.scenario.true_model();
    TrainedModel tm;
    std::vector<int> test_ids;
    const ResultRow row = run_cell(spec, data, truth, 0, 0, seed_index, &tm, &test_ids);
    if (!row.success) {
        std::cerr << "training failed: " << row.error << "\n";
        return 2;
    }

    Checkpoint ck;
    ck.model = tm.model;
    ck.scenario = cfg.scenario;
    ck.config_hash = config_hash(cfg);
    ck.gravity_scale = spec.sweep == SweepKind::GRAVITY ? value : 1.0;
    ck.data_seed = cfg.data_seed;
    ck.seed_index = seed_index;
    ck.test_ids = test_ids;
    ck.initial_val = tm.initial_val;
    ck.best_val = tm.best_val;
    ck.best_epoch = tm.best_epoch;
    ck.epochs = tm.epochs_run;

    ensure_dir(out_dir);
    const std::string stem =
        out_dir + "/" + cfg.scenario + "_" + method_name(method) + "_seed" +
        std::to_string(seed_index);
    save_checkpoint(ck, stem + ".ckpt.json");
    write_text_atomic(stem + ".history.csv", history_csv(tm));

    std::cout << "wrote " << stem << ".ckpt.json and " << stem << ".history.csv\n"
              << "validation: initial " << tm.initial_val << ", best " << tm.best_val
              << " at epoch " << tm.best_epoch << " of " << tm.epochs_run << "\n"
              << results_table_csv({row});
    return 0;
}

inline int cmd_eval(const CommonFlags& common, const std::string& checkpoint_path,
                    const std::string& out_file)
{
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    ExperimentConfig cfg;
    if (!common.config_path.empty()) {
        cfg = load_experiment_config(common.config_path);
        if (cfg.scenario != ck.scenario)
            throw std::runtime_error("config scenario '" + cfg.scenario +
                                     "' does not match checkpoint scenario '" + ck.scenario +
                                     "'");
    } else {
        cfg.scenario = ck.scenario;
        cfg.data_seed = ck.data_seed;
    }
    if (common.dataset.empty() && cfg.dataset.empty())
        throw std::runtime_error("eval needs a dataset (--dataset or config)");
    const Dataset data = obtain_dataset(cfg, common.dataset);

    const Scenario sc = make_scenario(ck.scenario);
    const Model truth = sc.true_model();
    Model skeleton = truth;
    skeleton.gravity *= ck.gravity_scale;

    std::vector<Trajectory> tests;
    if (ck.test_ids.empty()) {
        tests = data.trajectories;  // no recorded split: evaluate on everything
    } else {
        for (int id : ck.test_ids) {
            if (id < 0 || id >= data.n_trajectories())
                throw std::runtime_error("checkpoint test id " + std::to_string(id) +
                                         " is outside the dataset");
            tests.push_back(data.trajectories[id]);
        }
    }

    ResultRow row;
    row.scenario = ck.scenario;
    row.method = ck.model.method;
    row.sweep_value = ck.gravity_scale;
    row.seed_index = ck.seed_index;
    row.success = true;
    row.initial_val = ck.initial_val;
    row.final_val = ck.best_val;
    row.epochs = ck.epochs;
    row.metrics = learned_model_metrics(ck.model, skeleton, truth, tests, cfg.train.stepper,
                                        cfg.volume);

    const std::string table = results_table_csv({row});
    std::cout << table;
    if (!out_file.empty()) {
        if (const auto parent = std::filesystem::path(out_file).parent_path(); !parent.empty())
            ensure_dir(parent.string());
        write_text_atomic(out_file, table);
    }
    return 0;
}

// Per-metric plot files: one CSV per metric with a (method, sweep value) row
// carrying the mean and the 95% half-width, ready for external plotting.
inline void write_plot_files(const std::vector<ResultRow>& rows, const std::string& dir)
{
    struct MetricColumn {
        const char* name;
        double MetricReport::* field;
    };
    const MetricColumn columns[] = {
        {"e_volume", &MetricReport::e_volume},
        {"e_friction", &MetricReport::e_friction},
        {"e_inertia", &MetricReport::e_inertia},
        {"traj_pos_error", &MetricReport::traj_pos_error},
        {"traj_rot_error", &MetricReport::traj_rot_error},
    };
    std::vector<std::pair<Method, double>> groups;
    for (const ResultRow& r : rows) {
        const std::pair<Method, double> key{r.method, r.sweep_value};
        if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
    }
    for (const MetricColumn& col : columns) {
        std::string out = "method,sweep_value,n,mean,ci95_half_width\n";
        for (const auto& [method, value] : groups) {
            std::vector<double> xs;
            for (const ResultRow& r : rows)
                if (r.method == method && r.sweep_value == value && r.success &&
                    !std::isnan(r.metrics.*(col.field)))
                    xs.push_back(r.metrics.*(col.field));
            const MeanCi c = mean_ci(xs);
            out += std::string(method_name(method)) + "," + detail::csv_double(value) + "," +
                   std::to_string(c.n) + "," + detail::csv_double(c.mean) + "," +
                   detail::csv_double(c.half_width) + "\n";
        }
        write_text_atomic(dir + "/plot_" + col.name + ".csv", out);
    }
}

inline int cmd_sweep(const CommonFlags& common, std::optional<int> workers,
                     std::optional<bool> record_timing)
{
    ExperimentConfig cfg = load_experiment_config(common.config_path);
    if (workers) cfg.workers = *workers;
    if (record_timing) cfg.record_timing = *record_timing;
    const std::string out_dir = resolve_out_dir(cfg, common.out_dir);
    const std::string hash = config_hash(cfg);

    const Dataset data = obtain_dataset(cfg, common.dataset);
    const RunSpec spec = cfg.to_run_spec();
    const Model truth = spec.scenario.true_model();

    const std::string run_dir = out_dir + "/sweep_" + hash;
    const std::string cache_dir = out_dir + "/cache/" + hash;
    ensure_dir(run_dir);
    ensure_dir(cache_dir);

    const int nv = static_cast<int>(spec.sweep_values.size());
    const int nm = static_cast<int>(spec.methods.size());
    const int cells = nv * nm * spec.n_seeds;
    std::vector<ResultRow> rows(cells);
    std::vector<std::string> cell_paths(cells);
    std::vector<int> pending;
    int reused = 0;

    for (int c = 0; c < cells; ++c) {
        const int vi = c / (nm * spec.n_seeds);
        const int mi = (c / spec.n_seeds) % nm;
        const int si = c % spec.n_seeds;
        cell_paths[c] = cache_dir + "/cell_" + std::to_string(vi) + "_" + std::to_string(mi) +
                        "_" + std::to_string(si) + ".json";
        bool cached = false;
        if (std::filesystem::exists(cell_paths[c])) {
            try {
                const ResultRow r = result_row_from_json(Json::parse(read_text_file(cell_paths[c])));
                // A stale or foreign cell is recomputed, not trusted.
                if (r.method == spec.methods[mi] && r.sweep_value == spec.sweep_values[vi] &&
                    r.seed_index == si && r.scenario == spec.scenario.name) {
                    rows[c] = r;
                    cached = true;
                    ++reused;
                }
            } catch (const std::exception&) {
                cached = false;
            }
        }
        if (!cached) pending.push_back(c);
    }

    std::atomic<size_t> next{0};
    const auto worker = [&] {
        for (size_t k = next.fetch_add(1); k < pending.size(); k = next.fetch_add(1)) {
            const int c = pending[k];
            const int vi = c / (nm * spec.n_seeds);
            const int mi = (c / spec.n_seeds) % nm;
            const int si = c % spec.n_seeds;
            rows[c] = run_cell(spec, data, truth, vi, mi, si);
            write_text_atomic(cell_paths[c], json_from_result_row(rows[c]).dump(2) + "\n");
        }
    };
    const int n_workers =
        std::max(1, std::min(spec.workers, static_cast<int>(pending.size())));
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    write_text_atomic(run_dir + "/results.csv", results_table_csv(rows));
    write_text_atomic(run_dir + "/summary.csv", summary_table_csv(rows));
    write_plot_files(rows, run_dir);
    Json meta;
    meta["config_hash"] = hash;
    meta["config"] = json_from_experiment_config(cfg);
    meta["dataset_model_hash"] = data.model_hash;
    write_text_atomic(run_dir + "/meta.json", meta.dump(2) + "\n");

    int ok = 0;
    for (const ResultRow& r : rows) ok += r.success ? 1 : 0;
    std::cout << "sweep " << hash << ": " << ok << "/" << cells << " cells succeeded ("
              << reused << " from cache)\n"
              << "results in " << run_dir << "\n";
    for (const ResultRow& r : rows)
        if (!r.success)
            std::cout << "failed cell: " << method_name(r.method) << " value " << r.sweep_value
                      << " seed " << r.seed_index << ": " << r.error << "\n";
    return ok > 0 ? 0 : 2;
}

inline int cmd_inspect(const std::string& path)
{
    const std::string text = read_text_file(path);
    const auto first_newline = text.find('\n');
    Json head;
    try {
        head = Json::parse(first_newline == std::string::npos
                               ? text
                               : text.substr(0, first_newline));
    } catch (const std::exception&) {
        try {
            head = Json::parse(text);
        } catch (const std::exception& e) {
            throw std::runtime_error("inspect: " + path + " is not JSON or JSONL: " + e.what());
        }
    }
    if (!head.is_object()) throw std::runtime_error("inspect: no JSON object at " + path);

    if (head.contains("schema") && head.at("schema") == kDatasetSchema) {
        const Dataset ds = load_dataset(path);
        std::cout << "dataset: scenario " << ds.scenario << ", " << ds.n_trajectories()
                  << " tosses x " << ds.steps << " steps, dt " << ds.dt << "\n"
                  << "model hash " << ds.model_hash << ", seed " << ds.seed << "\n"
                  << "contact events: " << total_contact_events(ds) << "\n";
        return 0;
    }
    if (head.contains("schema") && head.at("schema") == kCheckpointSchema) {
        const Checkpoint ck = load_checkpoint(path);
        std::cout << "checkpoint: " << method_name(ck.model.method) << " on " << ck.scenario
                  << ", seed index " << ck.seed_index << "\n"
                  << "validation: initial " << ck.initial_val << ", best " << ck.best_val
                  << " at epoch " << ck.best_epoch << " of " << ck.epochs << "\n"
                  << "gravity scale " << ck.gravity_scale << ", config hash " << ck.config_hash
                  << "\n";
        if (method_is_structured(ck.model.method)) {
            std::cout << "friction " << ck.model.params.mu << ", bodies "
                      << ck.model.params.n_bodies() << "\n";
        }
        if (ck.model.has_net()) {
            std::cout << "net dims";
            for (int d : ck.model.net.dims) std::cout << " " << d;
            std::cout << " (" << ck.model.net.n_params() << " parameters)\n";
        }
        std::cout << "test trajectories: " << ck.test_ids.size() << "\n";
        return 0;
    }
    if (head.contains("bodies")) {
        const Model m = load_model(path);
        std::cout << "model: " << m.n_bodies() << " bodies, " << m.n_joints() << " joints\n"
                  << "friction " << m.friction << ", total mass " << m.total_mass
                  << ", gravity " << m.gravity << "\n"
                  << "hash " << model_hash(m) << "\n";
        return 0;
    }
    const ExperimentConfig cfg = experiment_config_from_json(head);
    std::cout << "experiment config: scenario " << cfg.scenario << ", sweep "
              << sweep_kind_name(cfg.sweep) << " over " << cfg.sweep_values.size()
              << " values, " << cfg.methods.size() << " methods x " << cfg.n_seeds
              << " seeds\n"
              << "hash " << config_hash(cfg) << "\n"
              << json_from_experiment_config(cfg).dump(2) << "\n";
    return 0;
}

}  // namespace cli_detail

// Front-end entry point; args exclude the program name. Returns the process
// exit code instead of calling std::exit, so tests can drive it in-process.
inline int run_cli(std::vector<std::string> args)
{
    CLI::App app{"contact-implicit system identification toolkit"};
    app.require_subcommand(1);

    cli_detail::CommonFlags common;
    std::string out_file, method_str, checkpoint_path, inspect_path;
    int seed_index = 0;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> tosses_override, workers_override;
    std::optional<double> sweep_value;
    bool timing_flag = false;

    CLI::App* gen = app.add_subcommand("gen-data", "generate a toss dataset");
    gen->add_option("--config", common.config_path, "experiment config file")->required();
    gen->add_option("--out", out_file, "output dataset path");
    gen->add_option("--out-dir", common.out_dir, "output directory override");
    gen->add_option("--seed", seed_override, "data seed override");
    gen->add_option("--tosses", tosses_override, "toss count override");

    CLI::App* train = app.add_subcommand("train", "train one method on a dataset");
    train->add_option("--config", common.config_path, "experiment config file")->required();
    train->add_option("--method", method_str, "ccn, ccn-r, diffsim, or end-to-end")->required();
    train->add_option("--dataset", common.dataset, "dataset file (default: generate)");
    train->add_option("--out-dir", common.out_dir, "output directory override");
    train->add_option("--seed-index", seed_index, "seed index of the cell to run");
    train->add_option("--sweep-value", sweep_value, "train size or gravity fraction override");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on held-out data");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval->add_option("--dataset", common.dataset, "dataset file");
    eval->add_option("--config", common.config_path, "experiment config file");
    eval->add_option("--out", out_file, "also write the metric row here");

    CLI::App* sweep = app.add_subcommand("sweep", "run the full experiment grid");
    sweep->add_option("--config", common.config_path, "experiment config file")->required();
    sweep->add_option("--dataset", common.dataset, "dataset file (default: generate)");
    sweep->add_option("--out-dir", common.out_dir, "output directory override");
    sweep->add_option("--workers", workers_override, "worker thread count");
    sweep->add_flag("--record-timing", timing_flag, "record wall times in result rows");

    CLI::App* inspect = app.add_subcommand("inspect", "summarize a dataset, checkpoint, "
                                                      "model, or config file");
    inspect->add_option("file", inspect_path, "file to summarize")->required();

    try {
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed())
            return cli_detail::cmd_gen_data(common, out_file, seed_override, tosses_override);
        if (train->parsed())
            return cli_detail::cmd_train(common, method_str, seed_index, sweep_value);
        if (eval->parsed()) return cli_detail::cmd_eval(common, checkpoint_path, out_file);
        if (sweep->parsed())
            return cli_detail::cmd_sweep(
                common, workers_override,
                timing_flag ? std::optional<bool>(true) : std::nullopt);
        if (inspect->parsed()) return cli_detail::cmd_inspect(inspect_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}

}  // namespace cisid
