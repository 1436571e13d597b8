#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cisid/dataset.hpp"
#include "cisid/scenario.hpp"
#include "cisid/training.hpp"
#include "test_util.hpp"

using namespace cisid;

namespace {

// Free-flight transitions of an isotropic single body: the next velocity is
// exactly affine in the current one, so a linear net can drive the
// end-to-end loss to zero.
std::vector<TransitionSample> ballistic_samples(const Model& m, int n, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<TransitionSample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        State x0 = test::random_state(rng, 0);
        x0.q.base_position.z() = 10.0;  // far above ground: no contact in one step
        const Trajectory t = rollout(m, x0, 1, 0.01);
        out.push_back(TransitionSample{t.states[0], t.states[1], t.dt});
    }
    return out;
}

Scenario tiny_cube_scenario()
{
    Scenario sc = make_scenario("cube_toss");
    sc.steps = 40;  // short horizon keeps these tests quick
    return sc;
}

}  // namespace

TEST_CASE("adam satisfies its basic contracts")
{
    const AdamConfig cfg{1e-2, 0.9, 0.999, 1e-8};

    SECTION("zero gradient from a fresh state leaves parameters unchanged")
    {
        VecX x(3);
        x << 1.0, -2.0, 0.5;
        const VecX before = x;
        AdamState st;
        adam_step(x, VecX::Zero(3), st, cfg);
        CHECK((x - before).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("moments decay geometrically once the gradient goes quiet")
    {
        VecX x = VecX::Zero(2);
        AdamState st;
        VecX g(2);
        g << 1.0, -3.0;
        adam_step(x, g, st, cfg);
        const VecX m1 = st.m, v1 = st.v;
        adam_step(x, VecX::Zero(2), st, cfg);
        CHECK((st.m - 0.9 * m1).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((st.v - 0.999 * v1).cwiseAbs().maxCoeff() < 1e-18);
    }

    SECTION("a one-dimensional quadratic reaches 1e-6 within 2000 steps")
    {
        VecX x = VecX::Zero(1);
        AdamState st;
        bool hit = false;
        for (int t = 0; t < 2000 && !hit; ++t) {
            VecX g(1);
            g << 2.0 * (x[0] - 3.0);
            adam_step(x, g, st, cfg);
            hit = std::abs(x[0] - 3.0) < 1e-6;
        }
        CHECK(hit);
    }

    SECTION("shape mismatches are rejected")
    {
        VecX x = VecX::Zero(2);
        AdamState st;
        CHECK_THROWS_AS(adam_step(x, VecX::Zero(3), st, cfg), std::invalid_argument);
    }
}

TEST_CASE("method names round trip")
{
    for (Method m : {Method::CCN, Method::CCN_R, Method::DIFFSIM, Method::END_TO_END})
        CHECK(method_from_string(method_name(m)) == m);
    CHECK_THROWS_AS(method_from_string("newton"), std::invalid_argument);
}

TEST_CASE("learned models round trip through json")
{
    const Model truth = test::single_body_model(test::unit_inertia());
    Rng rng(21);

    SECTION("structured model with a residual net")
    {
        LearnedModel lm;
        lm.method = Method::CCN_R;
        lm.params = sample_initial_parameters(truth, rng);
        lm.net = make_residual_net(truth.n_joints(), rng);
        const Json j = json_from_learned_model(lm);
        const LearnedModel back = learned_model_from_json(Json::parse(j.dump()));
        CHECK(back.method == Method::CCN_R);
        REQUIRE(back.params.flatten().size() == lm.params.flatten().size());
        CHECK((back.params.flatten() - lm.params.flatten()).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE(back.net.params.size() == lm.net.params.size());
        CHECK((back.net.params - lm.net.params).cwiseAbs().maxCoeff() == 0.0);
        CHECK(json_from_learned_model(back).dump() == j.dump());
    }

    SECTION("end-to-end model stores no structured parameters")
    {
        LearnedModel lm;
        lm.method = Method::END_TO_END;
        lm.rotation_feature = true;
        lm.net = make_end_to_end_net(truth.n_joints(), rng, true);
        const Json j = json_from_learned_model(lm);
        CHECK(!j.contains("params"));
        const LearnedModel back = learned_model_from_json(j);
        CHECK(back.rotation_feature);
        CHECK(back.params.n_bodies() == 0);
        CHECK((back.net.params - lm.net.params).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("unknown keys are rejected")
    {
        LearnedModel lm;
        lm.method = Method::END_TO_END;
        lm.net = make_end_to_end_net(0, rng, false);
        Json j = json_from_learned_model(lm);
        j["extra"] = 1;
        CHECK_THROWS_AS(learned_model_from_json(j), std::invalid_argument);
    }
}

TEST_CASE("feature maps behave as documented")
{
    Rng rng(5);
    State x = test::random_state(rng, 1);

    SECTION("the rotation feature is invariant to quaternion sign")
    {
        State flipped = x;
        flipped.q.base_orientation.coeffs() *= -1.0;
        CHECK((quat_feature(flipped) - quat_feature(x)).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((raw_feature(flipped) - raw_feature(x)).cwiseAbs().maxCoeff() > 0.1);
    }

    SECTION("dimensions match the declared formulas")
    {
        CHECK(quat_feature(x).size() == quat_feature_dim(1));
        CHECK(raw_feature(x).size() == raw_feature_dim(1));
    }
}

TEST_CASE("training fits an end-to-end regressor on free flight")
{
    const Model m = test::single_body_model(test::unit_inertia());
    const std::vector<TransitionSample> train_set = ballistic_samples(m, 48, 31);
    const std::vector<TransitionSample> val_set = ballistic_samples(m, 16, 32);

    Rng rng(33);
    LearnedModel init;
    init.method = Method::END_TO_END;
    init.net = Mlp::create({raw_feature_dim(0), 6}, Activation::ReLU, rng, true);

    TrainConfig tc;
    tc.lr_net = 1e-2;
    tc.batch_size = 48;  // full batch: one clean gradient per epoch
    tc.max_epochs = 2000;
    tc.patience = 2000;
    tc.seed = 77;
    const TrainedModel tm = train(m, train_set, val_set, init, tc);

    CHECK(tm.best_val <= tm.initial_val);
    CHECK(tm.best_val < 1e-6);

    const std::vector<TransitionSample> fresh = ballistic_samples(m, 4, 99);
    for (const TransitionSample& s : fresh) {
        const VecX pred = tm.model.net.forward(raw_feature(s.x_k));
        CHECK((pred - s.x_k1.v.flat()).cwiseAbs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("violation training is deterministic and respects constraints")
{
    const Scenario sc = tiny_cube_scenario();
    const Dataset data = generate_dataset(sc, 4, 3);
    Rng split_rng(8);
    const DataSplit split = split_dataset(data, 2, split_rng);
    const Model truth = sc.true_model();

    Rng init_rng(12);
    LearnedModel init;
    init.method = Method::CCN;
    init.params = sample_initial_parameters(truth, init_rng);

    TrainConfig tc;
    tc.max_epochs = 2;
    tc.seed = 5;

    const TrainedModel a = train(truth, split.train, split.validation, init, tc);
    CHECK(a.best_val <= a.initial_val);
    CHECK(a.model.params.mu >= 0.0);
    CHECK(a.epochs_run == 2);

    const Model learned = apply_params(truth, a.model.params);
    CHECK(std::abs(learned.body_mass_sum() - truth.body_mass_sum()) <=
          1e-9 * truth.body_mass_sum());

    const TrainedModel b = train(truth, split.train, split.validation, init, tc);
    CHECK((a.model.params.flatten() - b.model.params.flatten()).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(a.history.size() == b.history.size());
    for (size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(a.history[i].val_loss == b.history[i].val_loss);
    }
}

TEST_CASE("training aborts on non-finite losses")
{
    SECTION("at initialization")
    {
        const Model m = test::single_body_model(test::unit_inertia());
        Rng rng(2);
        LearnedModel init;
        init.method = Method::END_TO_END;
        init.net = make_end_to_end_net(0, rng, false);
        init.net.params[0] = std::numeric_limits<double>::quiet_NaN();
        TrainConfig tc;
        tc.seed = 1;
        const auto samples = ballistic_samples(m, 4, 1);
        CHECK_THROWS_AS(train(m, samples, samples, init, tc), std::runtime_error);
    }

    SECTION("mid-training, naming the epoch")
    {
        const Scenario sc = tiny_cube_scenario();
        const Dataset data = generate_dataset(sc, 4, 3);
        Rng split_rng(8);
        DataSplit split = split_dataset(data, 2, split_rng);
        split.train[0].x_k.v.base_linear[0] = std::numeric_limits<double>::quiet_NaN();
        const Model truth = sc.true_model();

        Rng init_rng(12);
        LearnedModel init;
        init.method = Method::CCN;
        init.params = sample_initial_parameters(truth, init_rng);
        TrainConfig tc;
        tc.max_epochs = 2;
        tc.seed = 5;
        try {
            train(truth, split.train, split.validation, init, tc);
            FAIL("expected a non-finite loss abort");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
        }
    }
}

TEST_CASE("confidence intervals match hand-computed values")
{
    std::vector<double> xs{1, 2, 3, 4, 5, 6, 7, 8, 9};
    const MeanCi c = mean_ci(xs);
    CHECK(c.n == 9);
    CHECK(c.mean == 5.0);
    CHECK(std::abs(c.half_width - 2.306 * std::sqrt(7.5) / 3.0) < 1e-12);

    CHECK(mean_ci({4.2}).half_width == 0.0);
    CHECK(mean_ci({}).n == 0);
    CHECK(t_critical_95(1) == 12.706);
    CHECK(t_critical_95(8) == 2.306);
    CHECK(t_critical_95(30) == 2.042);
    CHECK(t_critical_95(31) == 1.96);
    CHECK_THROWS_AS(t_critical_95(0), std::invalid_argument);
}

TEST_CASE("experiments produce ordered, reproducible tables")
{
    const Scenario sc = tiny_cube_scenario();
    const Dataset data = generate_dataset(sc, 6, 17);

    RunSpec spec;
    spec.scenario = sc;
    spec.methods = {Method::CCN, Method::END_TO_END};
    spec.sweep = SweepKind::TRAIN_SIZE;
    spec.sweep_values = {2.0};
    spec.n_seeds = 2;
    spec.data_seed = 17;
    spec.train.max_epochs = 1;
    spec.train.seed = 41;
    spec.volume.samples = 20000;
    spec.workers = 1;

    const std::vector<ResultRow> rows = run_experiment(spec, &data);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].method == Method::CCN);
    CHECK(rows[0].seed_index == 0);
    CHECK(rows[1].method == Method::CCN);
    CHECK(rows[1].seed_index == 1);
    CHECK(rows[2].method == Method::END_TO_END);
    CHECK(rows[3].seed_index == 1);
    for (const ResultRow& r : rows) {
        INFO(r.error);
        CHECK(r.success);
        CHECK(r.wall_seconds == 0.0);  // timing off keeps tables bit-stable
    }
    CHECK(std::isnan(rows[2].metrics.e_volume));
    CHECK(std::isfinite(rows[2].metrics.traj_pos_error));
    CHECK(std::isfinite(rows[0].metrics.e_volume));

    spec.workers = 3;
    const std::vector<ResultRow> again = run_experiment(spec, &data);
    CHECK(results_table_csv(rows) == results_table_csv(again));

    const std::string table = results_table_csv(rows);
    CHECK(table.find("\ncube_toss,ccn,2.0,0,1,") != std::string::npos);
    CHECK(table.find(",nan,") != std::string::npos);

    const std::string summary = summary_table_csv(rows);
    CHECK(summary.find("\ncube_toss,ccn,2.0,2,") != std::string::npos);
    CHECK(summary.find("\ncube_toss,end_to_end,2.0,2,") != std::string::npos);
}
