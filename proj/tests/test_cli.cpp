#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cisid/cli.hpp"
#include "test_util.hpp"

using namespace cisid;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("cisid_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string tiny_config_text(const std::string& out_dir)
{
    Json j;
    j["scenario"] = "cube_toss";
    j["methods"] = Json::array({"ccn", "end-to-end"});
    j["sweep"] = "train_size";
    j["sweep_values"] = Json::array({2});
    j["n_seeds"] = 2;
    j["n_tosses"] = 6;
    j["train_size"] = 2;
    j["data_seed"] = 17;
    Json t;
    t["max_epochs"] = 1;
    t["seed"] = 41;
    j["train"] = std::move(t);
    j["volume_samples"] = 20000;
    j["workers"] = 2;
    j["out_dir"] = out_dir;
    return j.dump(2);
}

fs::path write_tiny_config(const fs::path& dir)
{
    const fs::path path = dir / "config.json";
    write_text_atomic(path.string(), tiny_config_text((dir / "out").string()));
    return path;
}

// Second line of a results table, split at commas.
std::vector<std::string> first_data_row(const std::string& csv)
{
    std::istringstream in(csv);
    std::string line;
    REQUIRE(std::getline(in, line));  // header
    REQUIRE(std::getline(in, line));
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    return cells;
}

}  // namespace

TEST_CASE("experiment configs round trip and hash stably")
{
    ExperimentConfig c;
    c.scenario = "articulated_toss";
    c.methods = {Method::CCN_R, Method::DIFFSIM};
    c.sweep = SweepKind::GRAVITY;
    c.sweep_values = {0.5, 1.0, 1.5};
    c.data_seed = 99;
    c.train.lr_net = 3e-4;

    const Json j = json_from_experiment_config(c);
    const ExperimentConfig back = experiment_config_from_json(j);
    CHECK(json_from_experiment_config(back).dump() == j.dump());
    CHECK(config_hash(back) == config_hash(c));

    SECTION("hash ignores plumbing but tracks substance")
    {
        ExperimentConfig moved = c;
        moved.out_dir = "elsewhere";
        moved.workers = 7;
        moved.record_timing = true;
        moved.dataset = "some.jsonl";
        CHECK(config_hash(moved) == config_hash(c));

        ExperimentConfig reseeded = c;
        reseeded.data_seed = 100;
        CHECK(config_hash(reseeded) != config_hash(c));
    }

    SECTION("strictness")
    {
        Json bad = j;
        bad["surprise"] = 1;
        CHECK_THROWS_AS(experiment_config_from_json(bad), std::invalid_argument);

        Json bad_scenario = j;
        bad_scenario["scenario"] = "mystery";
        CHECK_THROWS_AS(experiment_config_from_json(bad_scenario), std::invalid_argument);

        Json empty_methods = j;
        empty_methods["methods"] = Json::array();
        CHECK_THROWS_AS(experiment_config_from_json(empty_methods), std::invalid_argument);
    }

    SECTION("hyphenated method spellings are accepted")
    {
        CHECK(method_from_cli("ccn-r") == Method::CCN_R);
        CHECK(method_from_cli("end-to-end") == Method::END_TO_END);
        CHECK(method_from_cli("ccn_r") == Method::CCN_R);
    }
}

TEST_CASE("result rows round trip through json including NaN")
{
    ResultRow r;
    r.scenario = "cube_toss";
    r.method = Method::END_TO_END;
    r.sweep_value = 2.0;
    r.seed_index = 3;
    r.success = true;
    r.metrics.e_volume = std::numeric_limits<double>::quiet_NaN();
    r.metrics.e_friction = std::numeric_limits<double>::quiet_NaN();
    r.metrics.e_inertia = std::numeric_limits<double>::quiet_NaN();
    r.metrics.traj_pos_error = 0.125;
    r.metrics.traj_rot_error = 42.5;
    r.metrics.per_traj_pos = {0.1, 0.15};
    r.initial_val = 3.5;
    r.final_val = 1.25;
    r.epochs = 7;

    const ResultRow back = result_row_from_json(json_from_result_row(r));
    CHECK(std::isnan(back.metrics.e_volume));
    CHECK(std::isnan(back.metrics.e_inertia));
    CHECK(back.metrics.traj_pos_error == 0.125);
    CHECK(back.metrics.per_traj_pos == r.metrics.per_traj_pos);
    CHECK(back.final_val == 1.25);
    CHECK(back.method == Method::END_TO_END);
    CHECK(back.success);
}

TEST_CASE("checkpoints round trip and reject foreign schemas")
{
    const Model truth = test::single_body_model(test::unit_inertia());
    Rng rng(4);
    Checkpoint ck;
    ck.model.method = Method::CCN_R;
    ck.model.params = sample_initial_parameters(truth, rng);
    ck.model.net = make_residual_net(0, rng);
    ck.scenario = "cube_toss";
    ck.config_hash = "abc123";
    ck.gravity_scale = 1.5;
    ck.data_seed = 17;
    ck.seed_index = 2;
    ck.test_ids = {4, 5};
    ck.initial_val = 2.0;
    ck.best_val = 0.5;
    ck.best_epoch = 9;
    ck.epochs = 12;

    const fs::path dir = fresh_dir("ckpt");
    const std::string path = (dir / "model.ckpt.json").string();
    save_checkpoint(ck, path);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.model.method == Method::CCN_R);
    CHECK((back.model.params.flatten() - ck.model.params.flatten()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.model.net.params - ck.model.net.params).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.gravity_scale == 1.5);
    CHECK(back.test_ids == ck.test_ids);
    CHECK(back.config_hash == "abc123");

    Json j = json_from_checkpoint(ck);
    j["schema"] = "checkpoint-v9";
    CHECK_THROWS_AS(checkpoint_from_json(j), std::invalid_argument);
}

TEST_CASE("gen-data is deterministic and validates its inputs")
{
    const fs::path dir = fresh_dir("gendata");
    const fs::path cfg = write_tiny_config(dir);

    const std::string a = (dir / "a.jsonl").string();
    const std::string b = (dir / "b.jsonl").string();
    REQUIRE(run_cli({"gen-data", "--config", cfg.string(), "--out", a}) == 0);
    REQUIRE(run_cli({"gen-data", "--config", cfg.string(), "--out", b}) == 0);
    CHECK(read_text_file(a) == read_text_file(b));

    const Dataset ds = load_dataset(a);
    CHECK(ds.n_trajectories() == 6);
    CHECK(ds.scenario == "cube_toss");

    CHECK(run_cli({"gen-data", "--config", (dir / "absent.json").string()}) == 2);
    CHECK(run_cli({"gen-data"}) == 1);
    CHECK(run_cli({"no-such-command"}) == 1);
}

TEST_CASE("train, eval, and sweep agree end to end")
{
    const fs::path dir = fresh_dir("flow");
    const fs::path cfg = write_tiny_config(dir);
    const std::string data_path = (dir / "data.jsonl").string();
    REQUIRE(run_cli({"gen-data", "--config", cfg.string(), "--out", data_path}) == 0);

    SECTION("train writes a loadable checkpoint and eval reproduces its metrics")
    {
        REQUIRE(run_cli({"train", "--config", cfg.string(), "--dataset", data_path,
                         "--method", "ccn", "--seed-index", "0"}) == 0);
        const std::string ckpt = (dir / "out" / "cube_toss_ccn_seed0.ckpt.json").string();
        const Checkpoint ck = load_checkpoint(ckpt);
        CHECK(ck.model.method == Method::CCN);
        CHECK(ck.test_ids.size() == 2);
        CHECK(ck.epochs == 1);

        const std::string hist =
            read_text_file((dir / "out" / "cube_toss_ccn_seed0.history.csv").string());
        CHECK(hist.rfind("epoch,train_loss,val_loss\n", 0) == 0);

        const std::string eval_out = (dir / "eval.csv").string();
        REQUIRE(run_cli({"eval", "--checkpoint", ckpt, "--dataset", data_path, "--config",
                         cfg.string(), "--out", eval_out}) == 0);
        REQUIRE(run_cli({"eval", "--checkpoint", ckpt, "--dataset", data_path, "--config",
                         cfg.string(), "--out", eval_out + ".b"}) == 0);
        CHECK(read_text_file(eval_out) == read_text_file(eval_out + ".b"));
        const auto cells = first_data_row(read_text_file(eval_out));
        REQUIRE(cells.size() >= 15);
        CHECK(cells[0] == "cube_toss");
        CHECK(cells[1] == "ccn");
        CHECK(cells[4] == "1");
    }

    SECTION("eval rejects a mismatched dataset")
    {
        REQUIRE(run_cli({"train", "--config", cfg.string(), "--dataset", data_path,
                         "--method", "ccn", "--seed-index", "0"}) == 0);
        const std::string ckpt = (dir / "out" / "cube_toss_ccn_seed0.ckpt.json").string();
        const std::string other = (dir / "other.jsonl").string();
        REQUIRE(run_cli({"gen-data", "--config", cfg.string(), "--out", other, "--seed",
                         "99"}) == 0);
        CHECK(run_cli({"eval", "--checkpoint", ckpt, "--dataset", other, "--config",
                       cfg.string()}) == 2);
    }

    SECTION("sweep caches cells and reruns byte-identically")
    {
        REQUIRE(run_cli({"sweep", "--config", cfg.string(), "--dataset", data_path}) == 0);
        ExperimentConfig c = load_experiment_config(cfg.string());
        const std::string hash = config_hash(c);
        const fs::path run_dir = dir / "out" / ("sweep_" + hash);
        const fs::path cache_dir = dir / "out" / "cache" / hash;
        REQUIRE(fs::exists(run_dir / "results.csv"));
        REQUIRE(fs::exists(run_dir / "summary.csv"));
        REQUIRE(fs::exists(run_dir / "meta.json"));
        CHECK(fs::exists(run_dir / "plot_e_volume.csv"));
        CHECK(fs::exists(run_dir / "plot_traj_pos_error.csv"));

        int cached_cells = 0;
        for (const auto& e : fs::directory_iterator(cache_dir)) {
            const ResultRow r = result_row_from_json(Json::parse(read_text_file(e.path())));
            CHECK(r.scenario == "cube_toss");
            ++cached_cells;
        }
        CHECK(cached_cells == 4);

        const std::string results = read_text_file((run_dir / "results.csv").string());
        CHECK(results.find("\ncube_toss,ccn,2.0,0,1,") != std::string::npos);
        CHECK(results.find("\ncube_toss,end_to_end,2.0,1,1,") != std::string::npos);

        REQUIRE(run_cli({"sweep", "--config", cfg.string(), "--dataset", data_path}) == 0);
        CHECK(read_text_file((run_dir / "results.csv").string()) == results);

        const Json meta = Json::parse(read_text_file((run_dir / "meta.json").string()));
        CHECK(meta.at("config_hash").get<std::string>() == hash);
    }

    SECTION("inspect recognizes every artifact kind")
    {
        CHECK(run_cli({"inspect", data_path}) == 0);
        CHECK(run_cli({"inspect", cfg.string()}) == 0);
        REQUIRE(run_cli({"train", "--config", cfg.string(), "--dataset", data_path,
                         "--method", "end-to-end", "--seed-index", "1"}) == 0);
        CHECK(run_cli({"inspect",
                       (dir / "out" / "cube_toss_end_to_end_seed1.ckpt.json").string()}) == 0);
        CHECK(run_cli({"inspect", (dir / "nothing.json").string()}) == 2);
    }
}

TEST_CASE("evaluating the true model reports zero errors")
{
    const fs::path dir = fresh_dir("trueeval");
    const fs::path cfg = write_tiny_config(dir);
    const std::string data_path = (dir / "data.jsonl").string();
    REQUIRE(run_cli({"gen-data", "--config", cfg.string(), "--out", data_path}) == 0);

    const Scenario sc = make_scenario("cube_toss");
    Checkpoint ck;
    ck.model.method = Method::CCN;
    ck.model.params = StructuredParams::from_model(sc.true_model());
    ck.scenario = "cube_toss";
    ck.config_hash = "truth";
    ck.data_seed = 17;
    ck.test_ids = {0, 1, 2};
    const std::string ckpt = (dir / "truth.ckpt.json").string();
    save_checkpoint(ck, ckpt);

    const std::string out = (dir / "true_eval.csv").string();
    REQUIRE(run_cli({"eval", "--checkpoint", ckpt, "--dataset", data_path, "--config",
                     cfg.string(), "--out", out}) == 0);
    const auto cells = first_data_row(read_text_file(out));
    REQUIRE(cells.size() >= 15);
    CHECK(std::stod(cells[5]) < 1e-9);   // e_volume
    CHECK(std::stod(cells[6]) < 1e-9);   // e_friction
    CHECK(std::stod(cells[7]) < 1e-9);   // e_inertia
    CHECK(std::stod(cells[8]) < 1e-9);   // traj position error
    CHECK(std::stod(cells[9]) < 1e-9);   // traj rotation error
}
