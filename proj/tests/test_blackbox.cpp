#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <numeric>

#include "dso/blackbox.hpp"
#include "dso/complexity.hpp"
#include "support/oracles.hpp"

using namespace dso;

namespace {

std::vector<int> first_indices(int n) {
    std::vector<int> r(static_cast<std::size_t>(n));
    std::iota(r.begin(), r.end(), 0);
    return r;
}

BlackBoxConfig config_for(int dim, long long iterations, std::uint64_t seed) {
    BlackBoxConfig cfg;
    cfg.dim = dim;
    cfg.lambda = 2;
    cfg.iterations = iterations;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("the subset loss counts missing relevant bits") {
    const StructureMask m{{1, 0, 1, 0, 0}};
    const std::vector<int> all{0, 1, 2, 3, 4};
    CHECK(subset_count_loss(m, all) == 3.0);
    const std::vector<int> pair{0, 2};
    CHECK(subset_count_loss(m, pair) == 0.0);
    const std::vector<int> missing{1, 3};
    CHECK(subset_count_loss(m, missing) == 2.0);
    CHECK(subset_count_loss(m, {}) == 0.0);
    const std::vector<int> bad{5};
    CHECK_THROWS_AS(subset_count_loss(m, bad), std::invalid_argument);
    const std::vector<int> negative{-1};
    CHECK_THROWS_AS(subset_count_loss(m, negative), std::invalid_argument);
}

TEST_CASE("configuration validation") {
    const auto c = unit_selection_coeffs(5);
    const MaskLoss loss = [](const StructureMask& m) { return -static_cast<double>(m.count_ones()); };
    CHECK_THROWS_AS(run_black_box(config_for(2, 10, 1), loss, c, 0.0), std::invalid_argument);
    BlackBoxConfig bad_lambda = config_for(5, 10, 1);
    bad_lambda.lambda = 1;
    CHECK_THROWS_AS(run_black_box(bad_lambda, loss, c, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(run_black_box(config_for(5, 0, 1), loss, c, 0.0), std::invalid_argument);
    const auto short_c = unit_selection_coeffs(4);
    CHECK_THROWS_AS(run_black_box(config_for(5, 10, 1), loss, short_c, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(run_black_box(config_for(5, 10, 1), MaskLoss{}, c, 0.0), std::invalid_argument);
}

TEST_CASE("every bit relevant: theta rises toward all-on") {
    // d = 20, R = everything, no penalty. After convergence theta hovers in a
    // stochastic equilibrium below the upper clamp, so the sharp check is on
    // the deterministic mask and the magnitude check allows the hover band.
    const int d = 20;
    const auto c = unit_selection_coeffs(d);
    const auto relevant = first_indices(d);
    const MaskLoss loss = [&](const StructureMask& m) {
        return subset_count_loss(m, relevant);
    };

    int good_runs = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto result = run_black_box(config_for(d, 20000, seed), loss, c, 0.0);
        const StructureMask det = deterministic_mask(result.theta);
        bool high = true;
        for (std::size_t i = 0; i < result.theta.dim(); ++i) {
            high = high && result.theta[i] > 0.75;
        }
        good_runs += det.count_ones() == d && high ? 1 : 0;
    }
    CHECK(good_runs >= 9);
}

TEST_CASE("penalty prunes the irrelevant half") {
    // d = 20 but only the first 10 bits matter; with a small penalty the
    // optimum is exactly the relevant set. Pruned coordinates bounce around
    // above the lower clamp, hence the loose magnitude band.
    const int d = 20;
    const auto c = unit_selection_coeffs(d);
    const auto relevant = first_indices(10);
    const MaskLoss loss = [&](const StructureMask& m) {
        return subset_count_loss(m, relevant);
    };

    int good_runs = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto result = run_black_box(config_for(d, 20000, seed), loss, c, 0.125);
        const StructureMask det = deterministic_mask(result.theta);
        bool split = true;
        for (int i = 0; i < d; ++i) {
            split = split && det.bits[static_cast<std::size_t>(i)] == (i < 10 ? 1 : 0);
        }
        for (int i = 0; i < 10; ++i) split = split && result.theta[static_cast<std::size_t>(i)] > 0.75;
        for (int i = 10; i < 20; ++i) split = split && result.theta[static_cast<std::size_t>(i)] < 0.45;
        good_runs += split ? 1 : 0;
    }
    CHECK(good_runs >= 8);
}

TEST_CASE("a smaller search settles faster") {
    const int d = 10;
    const auto c = unit_selection_coeffs(d);
    const auto relevant = first_indices(d);
    const MaskLoss loss = [&](const StructureMask& m) {
        return subset_count_loss(m, relevant);
    };
    int good_runs = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto result = run_black_box(config_for(d, 5000, seed), loss, c, 0.0);
        const StructureMask det = deterministic_mask(result.theta);
        good_runs += det.count_ones() == d ? 1 : 0;
    }
    CHECK(good_runs >= 9);
}

TEST_CASE("under a constant loss only the penalty moves theta") {
    // every sampled pair ties, so the ranking contributes nothing; the drift
    // term alone pushes every coordinate monotonically to the matching bound.
    const int d = 8;
    const auto c = unit_selection_coeffs(d);
    const MaskLoss flat = [](const StructureMask&) { return 1.0; };

    SUBCASE("positive penalty drives theta to the lower bound") {
        BlackBoxConfig cfg = config_for(d, 4000, 3);
        cfg.record_trajectory = true;
        const auto result = run_black_box(cfg, flat, c, 0.25);
        double last_mean = 0.5 * d;
        for (const auto& snap : result.trajectory) {
            const double mean = std::accumulate(snap.begin(), snap.end(), 0.0);
            CHECK(mean <= last_mean + 1e-15);
            last_mean = mean;
        }
        for (std::size_t i = 0; i < result.theta.dim(); ++i) {
            CHECK(result.theta[i] == result.theta.lower_bound());
        }
    }
    SUBCASE("negative penalty drives theta to the upper bound") {
        BlackBoxConfig cfg = config_for(d, 4000, 3);
        cfg.record_trajectory = true;
        const auto result = run_black_box(cfg, flat, c, -0.25);
        double last_mean = 0.0;
        for (const auto& snap : result.trajectory) {
            const double mean = std::accumulate(snap.begin(), snap.end(), 0.0);
            CHECK(mean >= last_mean - 1e-15);
            last_mean = mean;
        }
        for (std::size_t i = 0; i < result.theta.dim(); ++i) {
            CHECK(result.theta[i] == result.theta.upper_bound());
        }
    }
    SUBCASE("no penalty, no movement") {
        const auto result = run_black_box(config_for(d, 100, 3), flat, c, 0.0);
        for (std::size_t i = 0; i < result.theta.dim(); ++i) {
            CHECK(result.theta[i] == 0.5);
        }
    }
}

TEST_CASE("the recorded trajectory matches a manual replay") {
    const int d = 5;
    const auto c = unit_selection_coeffs(d);
    const auto relevant = first_indices(3);
    const MaskLoss loss = [&](const StructureMask& m) {
        return subset_count_loss(m, relevant);
    };
    BlackBoxConfig cfg = config_for(d, 50, 17);
    cfg.lambda = 4;
    cfg.record_trajectory = true;
    const auto result = run_black_box(cfg, loss, c, 0.0625);
    REQUIRE(result.trajectory.size() == 50);
    CHECK(result.trajectory.back() == result.theta.probs());

    // replay the same stream by hand
    Rng rng = make_rng(17, 0);
    BernoulliTheta theta(d, 0.5);
    const double eps = normalize_epsilon(0.0625, c);
    for (int it = 0; it < 50; ++it) {
        const auto masks = sample_masks(theta, 4, rng);
        std::vector<double> losses;
        for (const auto& m : masks) losses.push_back(loss(m));
        theta = update_theta(theta, masks, compute_utilities(losses), c, eps, 1.0 / d);
        CHECK(theta.probs() == result.trajectory[static_cast<std::size_t>(it)]);
    }
}

TEST_CASE("trajectory files name one column per coordinate") {
    const int d = 4;
    const auto c = unit_selection_coeffs(d);
    const MaskLoss flat = [](const StructureMask&) { return 1.0; };
    BlackBoxConfig cfg = config_for(d, 3, 5);
    cfg.record_trajectory = true;
    const auto result = run_black_box(cfg, flat, c, 0.5);

    oracle::TempDir dir;
    write_trajectory_csv(result, dir.path() / "trajectory.csv");
    std::ifstream in(dir.path() / "trajectory.csv");
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "iteration,theta_0,theta_1,theta_2,theta_3");
    int rows = 0;
    while (std::getline(in, line)) {
        CHECK(line.rfind(std::to_string(rows) + ",", 0) == 0);
        ++rows;
    }
    CHECK(rows == 3);
}
