#include "cisid/params.hpp"

#include "cisid/scenario.hpp"
#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace cisid;

TEST_CASE("structured parameters round trip through a model")
{
    Rng rng(301);
    const Model truth = test::two_link_model(test::random_inertia(rng, 0.3),
                                             test::random_inertia(rng, 0.5));
    const StructuredParams p = StructuredParams::from_model(truth);
    const Model back = apply_params(truth, p);

    CHECK(back.friction == truth.friction);
    CHECK(std::abs(back.body_mass_sum() - truth.total_mass) < 1e-12);
    for (int b = 0; b < truth.n_bodies(); ++b) {
        for (size_t k = 0; k < truth.bodies[b].geometry.vertices.size(); ++k) {
            CHECK(test::max_abs_diff(back.bodies[b].geometry.vertices[k],
                                     truth.bodies[b].geometry.vertices[k]) == 0.0);
        }
        CHECK(std::abs(back.bodies[b].inertia.mass - truth.bodies[b].inertia.mass) < 1e-9);
        CHECK(test::max_abs_diff(back.bodies[b].inertia.com, truth.bodies[b].inertia.com) <
              1e-9);
        CHECK(test::max_abs_diff(back.bodies[b].inertia.rot_inertia,
                                 truth.bodies[b].inertia.rot_inertia) < 1e-9);
    }
    CHECK_NOTHROW(back.validate());
}

TEST_CASE("flattening is a bijection")
{
    Rng rng(302);
    const Model truth = test::two_link_model(test::random_inertia(rng), test::random_inertia(rng));
    StructuredParams p = StructuredParams::from_model(truth);
    REQUIRE(p.size() == 3 * 16 + 10 * 2 + 1);

    const VecX flat = p.flatten();
    StructuredParams q = StructuredParams::zeros_like(p);
    CHECK(q.flatten().norm() == 0.0);
    q.set_flat(flat);
    CHECK((q.flatten() - flat).norm() == 0.0);
    CHECK(q.mu == p.mu);
    CHECK(test::max_abs_diff(q.vertices[1][7], p.vertices[1][7]) == 0.0);
    CHECK((q.thetas[0] - p.thetas[0]).norm() == 0.0);

    VecX wrong(p.size() + 1);
    CHECK_THROWS_AS(q.set_flat(wrong), std::invalid_argument);
}

TEST_CASE("materialization rescales masses to the fixed total")
{
    Rng rng(303);
    const Model truth = test::two_link_model(test::random_inertia(rng, 0.3),
                                             test::random_inertia(rng, 0.5));
    StructuredParams p = StructuredParams::from_model(truth);
    // Doubling every raw mass must not change the materialized model at all:
    // theta shifts that scale pi uniformly are in the rescale's null space.
    for (Theta& t : p.thetas) t[9] += 0.5 * std::log(2.0);
    const Model m = apply_params(truth, p);
    CHECK(std::abs(m.body_mass_sum() - truth.total_mass) < 1e-12);
    for (int b = 0; b < truth.n_bodies(); ++b) {
        CHECK(std::abs(m.bodies[b].inertia.mass - truth.bodies[b].inertia.mass) < 1e-9);
        CHECK(test::max_abs_diff(m.bodies[b].inertia.rot_inertia,
                                 truth.bodies[b].inertia.rot_inertia) < 1e-9);
    }

    // Negative friction materializes clamped.
    p.mu = -0.2;
    CHECK(apply_params(truth, p).friction == 0.0);
}

TEST_CASE("rescale chain rule matches finite differences")
{
    Rng rng(304);
    const Model truth = test::two_link_model(test::random_inertia(rng, 0.3),
                                             test::random_inertia(rng, 0.5));
    StructuredParams p = StructuredParams::from_model(truth);

    // Random linear functional of the scaled inertial vectors.
    std::vector<Pi10> g(2);
    for (Pi10& v : g)
        for (int k = 0; k < 10; ++k) v[k] = rng.uniform(-1, 1);

    const auto value = [&](const StructuredParams& q) {
        const std::vector<Pi10> pis = scaled_pi(q, truth.total_mass);
        double s = 0.0;
        for (int b = 0; b < 2; ++b) s += g[b].dot(pis[b]);
        return s;
    };

    const std::vector<Theta> grad = chain_pi_gradient(p, truth.total_mass, g);
    const double h = 1e-6;
    for (int b = 0; b < 2; ++b) {
        for (int k = 0; k < 10; ++k) {
            StructuredParams qp = p, qm = p;
            qp.thetas[b][k] += h;
            qm.thetas[b][k] -= h;
            const double fd = (value(qp) - value(qm)) / (2 * h);
            CHECK(std::abs(fd - grad[b][k]) < 1e-5 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("initialization sampler stays inside the documented ranges")
{
    Rng rng(305);
    const Model truth = make_scenario("articulated_toss").true_model();
    for (int trial = 0; trial < 30; ++trial) {
        const StructuredParams p = sample_initial_parameters(truth, rng);
        REQUIRE(p.n_bodies() == 2);

        for (int b = 0; b < 2; ++b) {
            REQUIRE(p.vertices[b].size() == truth.bodies[b].geometry.vertices.size());
            for (size_t k = 0; k < p.vertices[b].size(); ++k) {
                for (int ax = 0; ax < 3; ++ax) {
                    const double t = truth.bodies[b].geometry.vertices[k][ax];
                    const double v = p.vertices[b][k][ax];
                    REQUIRE(t != 0.0);
                    CHECK(v / t >= 0.5);
                    CHECK(v / t <= 1.5);
                }
            }
        }
        CHECK(p.mu >= 0.5 * truth.friction);
        CHECK(p.mu <= 1.5 * truth.friction);

        const Model m = apply_params(truth, p);
        CHECK_NOTHROW(m.validate());
        for (int b = 0; b < 2; ++b) {
            CHECK(m.bodies[b].inertia.is_physical());
            // Center of mass within a quarter of the virtual box's dimensions:
            // box dims at most 1.5 x the true bounding box.
            for (int ax = 0; ax < 3; ++ax) {
                CHECK(std::abs(m.bodies[b].inertia.com[ax]) <= 1.5 * 0.25 * 0.1 + 1e-12);
            }
        }
    }

    Rng r1(9), r2(9);
    CHECK((sample_initial_parameters(truth, r1).flatten() -
           sample_initial_parameters(truth, r2).flatten()).norm() == 0.0);
}
