// Microbenchmarks for the hot paths: distribution updates, mask sampling,
// network passes, and a full structure-search step.

#include <numeric>
#include <random>
#include <vector>

#include "benchmark/benchmark.h"

#include "dso/bernoulli.hpp"
#include "dso/blackbox.hpp"
#include "dso/complexity.hpp"
#include "dso/network.hpp"
#include "dso/rng.hpp"

namespace {

using namespace dso;

Eigen::MatrixXd random_inputs(int dim, int n, std::uint64_t seed) {
    Rng rng = make_rng(seed, 7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd m(dim, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < dim; ++i) m(i, j) = unit(rng);
    }
    return m;
}

void bench_theta_update(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    BernoulliTheta theta(d, 0.5);
    const auto c = unit_selection_coeffs(d);
    Rng rng = make_rng(1, 0);
    const auto masks = sample_masks(theta, 8, rng);
    std::vector<double> losses(masks.size());
    std::iota(losses.begin(), losses.end(), 0.0);
    const UtilityVector utilities = compute_utilities(losses);
    for (auto _ : state) {
        theta = update_theta(theta, masks, utilities, c, 0.015625, 1.0 / d);
        benchmark::DoNotOptimize(theta);
    }
}
BENCHMARK(bench_theta_update)->Arg(128)->Arg(4096);

void bench_mask_sampling(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    const BernoulliTheta theta(d, 0.5);
    Rng rng = make_rng(2, 0);
    for (auto _ : state) {
        auto masks = sample_masks(theta, 2, rng);
        benchmark::DoNotOptimize(masks);
    }
}
BENCHMARK(bench_mask_sampling)->Arg(128)->Arg(4096);

void bench_forward(benchmark::State& state) {
    const MaskedTopology topo = MaskedTopology::unit_mlp({784, 64, 64, 10});
    Rng rng = make_rng(3, 1);
    const auto w = he_init<double>(topo, rng);
    StructureMask mask;
    mask.bits.assign(static_cast<std::size_t>(topo.mask_dim()), 1);
    const Eigen::MatrixXd inputs = random_inputs(784, 32, 4);
    for (auto _ : state) {
        auto logits = forward(w, topo, mask, inputs);
        benchmark::DoNotOptimize(logits);
    }
}
BENCHMARK(bench_forward);

void bench_backward(benchmark::State& state) {
    const MaskedTopology topo = MaskedTopology::unit_mlp({784, 64, 64, 10});
    Rng rng = make_rng(5, 1);
    const auto w = he_init<double>(topo, rng);
    StructureMask mask;
    mask.bits.assign(static_cast<std::size_t>(topo.mask_dim()), 1);
    Batch batch;
    batch.inputs = random_inputs(784, 32, 6);
    batch.labels.resize(32);
    for (int i = 0; i < 32; ++i) batch.labels[static_cast<std::size_t>(i)] = i % 10;
    for (auto _ : state) {
        auto grads = backward(w, topo, mask, batch);
        benchmark::DoNotOptimize(grads);
    }
}
BENCHMARK(bench_backward);

void bench_structure_search_step(benchmark::State& state) {
    const int d = 20;
    const auto c = unit_selection_coeffs(d);
    std::vector<int> relevant(10);
    std::iota(relevant.begin(), relevant.end(), 0);
    BernoulliTheta theta(d, 0.5);
    Rng rng = make_rng(7, 0);
    std::vector<double> losses(2);
    for (auto _ : state) {
        const auto masks = sample_masks(theta, 2, rng);
        for (std::size_t i = 0; i < masks.size(); ++i) {
            losses[i] = subset_count_loss(masks[i], relevant);
        }
        theta = update_theta(theta, masks, compute_utilities(losses), c, 0.125, 1.0 / d);
        benchmark::DoNotOptimize(theta);
    }
}
BENCHMARK(bench_structure_search_step);

void bench_usage_rate(benchmark::State& state) {
    const MaskedTopology topo = MaskedTopology::dense_block(16, 12, 12, 10);
    StructureMask mask;
    mask.bits.assign(static_cast<std::size_t>(topo.mask_dim()), 1);
    for (std::size_t i = 0; i < mask.bits.size(); i += 3) mask.bits[i] = 0;
    for (auto _ : state) {
        double rate = weight_usage_rate(topo, mask);
        benchmark::DoNotOptimize(rate);
    }
}
BENCHMARK(bench_usage_rate);

} // namespace

BENCHMARK_MAIN();
