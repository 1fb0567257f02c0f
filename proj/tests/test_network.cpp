#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "dso/errors.hpp"
#include "dso/network.hpp"
#include "support/oracles.hpp"

using namespace dso;

namespace {

StructureMask mask_from_bits(std::uint32_t bits, int d) {
    StructureMask m;
    m.bits.resize(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) m.bits[static_cast<std::size_t>(i)] = (bits >> i) & 1u;
    return m;
}

StructureMask all_ones(const MaskedTopology& topo) {
    StructureMask m;
    m.bits.assign(static_cast<std::size_t>(topo.mask_dim()), 1);
    return m;
}

Batch random_batch(const MaskedTopology& topo, int n, std::uint64_t seed) {
    Rng rng = make_rng(seed, 7);
    std::uniform_real_distribution<double> real(-1.0, 1.0);
    std::uniform_int_distribution<int> label(0, topo.output_width() - 1);
    Batch batch;
    batch.inputs.resize(topo.input_width(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < batch.inputs.rows(); ++i) batch.inputs(i, j) = real(rng);
        batch.labels.push_back(label(rng));
    }
    return batch;
}

/// True when the scalar weight (row, offset + j) of target t survives the mask.
bool weight_active(const MaskedTopology& topo, const StructureMask& mask, int t, int row,
                   const MaskedTopology::Segment& seg, int j) {
    if (topo.mode() == MaskMode::Connection) {
        return seg.bit < 0 || mask.bits[static_cast<std::size_t>(seg.bit)];
    }
    return oracle::unit_active(topo, mask, t, row) && oracle::unit_active(topo, mask, seg.source, j);
}

} // namespace

TEST_CASE("zeroed stores match the topology's shapes") {
    const MaskedTopology topo = MaskedTopology::unit_mlp({4, 6, 3});
    auto store = WeightStore<double>::zeros(topo);
    REQUIRE(store.weights.size() == 2);
    CHECK(store.weights[0].rows() == 6);
    CHECK(store.weights[0].cols() == 4);
    CHECK(store.weights[1].rows() == 3);
    CHECK(store.weights[1].cols() == 6);
    CHECK(store.biases[0].size() == 6);
    CHECK(store.biases[1].size() == 3);
    CHECK(store.param_count() == 4 * 6 + 6 + 6 * 3 + 3);
    CHECK(store.param_count() == topo.total_param_count());

    store.weights[0](1, 2) = 5.0;
    store.biases[1][0] = -1.0;
    store.set_zero();
    CHECK(store.weights[0](1, 2) == 0.0);
    CHECK(store.biases[1][0] == 0.0);

    const MaskedTopology block = MaskedTopology::dense_block(5, 3, 2, 4);
    auto bstore = WeightStore<double>::zeros(block);
    CHECK(bstore.weights[0].cols() == 5);       // input only
    CHECK(bstore.weights[1].cols() == 5 + 3);   // input ++ layer 1
    CHECK(bstore.weights[2].cols() == 5 + 6);   // input ++ layers 1, 2
}

TEST_CASE("he initialization draws zero-mean weights with 2/fan_in variance") {
    const MaskedTopology topo = MaskedTopology::unit_mlp({784, 64, 10});
    Rng rng = make_rng(11, 1);
    const auto store = he_init<double>(topo, rng);

    for (const auto& b : store.biases) {
        for (Eigen::Index i = 0; i < b.size(); ++i) CHECK(b[i] == 0.0);
    }

    const auto& W = store.weights[0];
    const double n = static_cast<double>(W.size());
    const double mean = W.sum() / n;
    const double var = (W.array() - mean).square().sum() / n;
    const double want = 2.0 / 784.0;
    CHECK(std::abs(mean) < 4.0 * std::sqrt(want / n));
    CHECK(var == doctest::Approx(want).epsilon(0.05));

    Rng again = make_rng(11, 1);
    const auto twin = he_init<double>(topo, again);
    CHECK(twin.weights[0] == store.weights[0]);
    CHECK(twin.weights[1] == store.weights[1]);

    Rng other = make_rng(11, 2);
    const auto different = he_init<double>(topo, other);
    CHECK(different.weights[0] != store.weights[0]);
}

TEST_CASE("all-ones mask reproduces the plain dense network") {
    const MaskedTopology topo = MaskedTopology::unit_mlp({3, 4, 2});
    Rng rng = make_rng(5, 1);
    const auto w = he_init<double>(topo, rng);
    const Batch batch = random_batch(topo, 6, 99);

    const auto logits = forward(w, topo, all_ones(topo), batch.inputs);
    REQUIRE(logits.rows() == 2);
    REQUIRE(logits.cols() == 6);

    const Eigen::MatrixXd h =
        ((w.weights[0] * batch.inputs).colwise() + w.biases[0]).cwiseMax(0.0);
    const Eigen::MatrixXd want = (w.weights[1] * h).colwise() + w.biases[1];
    CHECK((logits - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("masked forward agrees with a physically pruned network") {
    const MaskedTopology topos[] = {MaskedTopology::unit_mlp({3, 2, 3, 2}),
                                    MaskedTopology::dense_block(3, 2, 2, 2)};
    for (const auto& topo : topos) {
        Rng rng = make_rng(17, 1);
        const auto w = he_init<double>(topo, rng);
        const Batch batch = random_batch(topo, 4, 31);
        const int d = topo.mask_dim();
        for (std::uint32_t bits = 0; bits < (1u << d); ++bits) {
            const StructureMask mask = mask_from_bits(bits, d);
            const auto logits = forward(w, topo, mask, batch.inputs);
            for (Eigen::Index j = 0; j < batch.inputs.cols(); ++j) {
                std::vector<double> x(batch.inputs.col(j).data(),
                                      batch.inputs.col(j).data() + batch.inputs.rows());
                const std::vector<double> want = oracle::pruned_forward(w, topo, mask, x);
                for (Eigen::Index i = 0; i < logits.rows(); ++i) {
                    CHECK(std::abs(logits(i, j) - want[static_cast<std::size_t>(i)]) < 1e-12);
                }
            }
        }
    }
}

TEST_CASE("weights touching a gated-off unit cannot influence the output") {
    const MaskedTopology topo = MaskedTopology::unit_mlp({4, 3, 2});
    Rng rng = make_rng(23, 1);
    auto w = he_init<double>(topo, rng);
    const Batch batch = random_batch(topo, 5, 8);

    StructureMask mask = all_ones(topo);
    mask.bits[1] = 0;  // middle hidden unit off
    const auto before = forward(w, topo, mask, batch.inputs);

    w.weights[0].row(1).setConstant(1e6);  // incoming weights of the dead unit
    w.biases[0][1] = -3.0;
    w.weights[1].col(1).setConstant(-1e6);  // outgoing weights of the dead unit
    const auto after = forward(w, topo, mask, batch.inputs);

    CHECK((before - after).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a cleared connection bit removes its whole slice") {
    const MaskedTopology topo = MaskedTopology::dense_block(4, 3, 2, 2);
    Rng rng = make_rng(29, 1);
    auto w = he_init<double>(topo, rng);
    const Batch batch = random_batch(topo, 5, 12);

    StructureMask mask = all_ones(topo);
    mask.bits[1] = 0;  // input -> second block layer
    const auto before = forward(w, topo, mask, batch.inputs);

    const auto& seg = topo.incoming(2)[0];
    REQUIRE(seg.bit == 1);
    w.weights[1].middleCols(seg.offset, seg.width).setConstant(1e9);
    const auto after = forward(w, topo, mask, batch.inputs);
    CHECK((before - after).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cross entropy on known logits") {
    using M = Eigen::MatrixXd;

    SUBCASE("uniform logits over 10 classes cost ln 10") {
        M logits = M::Constant(10, 1, 3.25);
        const std::vector<int> labels{7};
        CHECK(cross_entropy_loss(logits, std::span<const int>(labels)) ==
              doctest::Approx(std::log(10.0)).epsilon(1e-14));
    }
    SUBCASE("a saturated correct class costs nearly nothing") {
        M logits(2, 1);
        logits << 100.0, 0.0;
        const std::vector<int> labels{0};
        CHECK(cross_entropy_loss(logits, std::span<const int>(labels)) < 1e-10);
    }
    SUBCASE("the batch loss is the mean of the per-sample losses") {
        M logits(2, 2);
        logits << 5.0, 0.0, 0.0, 5.0;
        const std::vector<int> labels{0, 0};
        const double l0 = std::log1p(std::exp(-5.0));
        const double l1 = 5.0 + std::log1p(std::exp(-5.0));
        CHECK(cross_entropy_loss(logits, std::span<const int>(labels)) ==
              doctest::Approx((l0 + l1) / 2.0).epsilon(1e-14));
    }
    SUBCASE("invalid shapes and labels are rejected") {
        M logits = M::Zero(3, 2);
        const std::vector<int> bad_size{0};
        CHECK_THROWS_AS(cross_entropy_loss(logits, std::span<const int>(bad_size)),
                        std::invalid_argument);
        const std::vector<int> bad_label{0, 3};
        CHECK_THROWS_AS(cross_entropy_loss(logits, std::span<const int>(bad_label)),
                        std::invalid_argument);
        M empty(3, 0);
        const std::vector<int> none;
        CHECK_THROWS_AS(cross_entropy_loss(empty, std::span<const int>(none)),
                        std::invalid_argument);
    }
    SUBCASE("non-finite logits raise the divergence error") {
        M logits = M::Zero(3, 1);
        const std::vector<int> labels{0};
        logits(1, 0) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(cross_entropy_loss(logits, std::span<const int>(labels)), DivergedError);
        logits(1, 0) = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(cross_entropy_loss(logits, std::span<const int>(labels)), DivergedError);
    }
}

TEST_CASE("class probabilities are column-stochastic and shift-invariant") {
    Eigen::MatrixXd logits(2, 1);
    logits << std::log(3.0), 0.0;
    const Eigen::MatrixXd probs = class_probabilities(logits);
    CHECK(probs(0, 0) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(probs(1, 0) == doctest::Approx(0.25).epsilon(1e-14));

    Rng rng = make_rng(41, 3);
    std::uniform_real_distribution<double> real(-5.0, 5.0);
    Eigen::MatrixXd big(7, 9);
    for (Eigen::Index j = 0; j < big.cols(); ++j) {
        for (Eigen::Index i = 0; i < big.rows(); ++i) big(i, j) = real(rng);
    }
    const Eigen::MatrixXd p = class_probabilities(big);
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
        CHECK(p.col(j).sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p.col(j).minCoeff() > 0.0);
    }
    const Eigen::MatrixXd shifted = class_probabilities(Eigen::MatrixXd(big.array() + 7.5));
    CHECK((p - shifted).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("analytic gradients match central finite differences") {
    struct Case {
        MaskedTopology topo;
        std::uint32_t off_bits;
    };
    const Case cases[] = {
        {MaskedTopology::unit_mlp({4, 6, 3}), (1u << 2) | (1u << 5)},
        // keep every layer fed by its raw-input slice: a layer fed only by
        // relu outputs sits exactly on the relu kink (zero init biases) for
        // samples where those outputs vanish, and central differences are
        // meaningless there
        {MaskedTopology::dense_block(3, 2, 2, 3), (1u << 2) | (1u << 4)},
    };
    for (const auto& c : cases) {
        Rng rng = make_rng(53, 1);
        const auto w = he_init<double>(c.topo, rng);
        const Batch batch = random_batch(c.topo, 5, 77);
        StructureMask mask = all_ones(c.topo);
        for (int i = 0; i < c.topo.mask_dim(); ++i) {
            if ((c.off_bits >> i) & 1u) mask.bits[static_cast<std::size_t>(i)] = 0;
        }
        const auto analytic = backward(w, c.topo, mask, batch);
        const auto numeric = oracle::fd_gradient(w, c.topo, mask, batch);
        CHECK(oracle::max_relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("gradients of gated-off parameters are exactly zero") {
    const MaskedTopology topos[] = {MaskedTopology::unit_mlp({3, 3, 2, 2}),
                                    MaskedTopology::dense_block(3, 2, 2, 2)};
    for (const auto& topo : topos) {
        Rng rng = make_rng(61, 1);
        const auto w = he_init<double>(topo, rng);
        const Batch batch = random_batch(topo, 4, 13);
        Rng mask_rng = make_rng(61, 2);
        std::bernoulli_distribution coin(0.5);
        for (int rep = 0; rep < 20; ++rep) {
            StructureMask mask;
            mask.bits.resize(static_cast<std::size_t>(topo.mask_dim()));
            for (auto& b : mask.bits) b = coin(mask_rng) ? 1 : 0;
            const auto grad = backward(w, topo, mask, batch);
            for (int t = 1; t <= topo.target_count(); ++t) {
                const auto& dW = grad.weights[static_cast<std::size_t>(t) - 1];
                for (const auto& seg : topo.incoming(t)) {
                    for (int row = 0; row < topo.layer_width(t); ++row) {
                        for (int j = 0; j < seg.width; ++j) {
                            if (!weight_active(topo, mask, t, row, seg, j)) {
                                CHECK(dW(row, seg.offset + j) == 0.0);
                            }
                        }
                    }
                }
                if (topo.mode() == MaskMode::Unit && t < topo.target_count()) {
                    const auto& db = grad.biases[static_cast<std::size_t>(t) - 1];
                    for (int row = 0; row < topo.layer_width(t); ++row) {
                        if (!oracle::unit_active(topo, mask, t, row)) CHECK(db[row] == 0.0);
                    }
                }
            }
        }
    }
}

TEST_CASE("zero inputs leave the first weight matrix without gradient") {
    const MaskedTopology topo = MaskedTopology::unit_mlp({4, 3, 2});
    Rng rng = make_rng(67, 1);
    const auto w = he_init<double>(topo, rng);
    Batch batch;
    batch.inputs = Eigen::MatrixXd::Zero(4, 3);
    batch.labels = {0, 1, 0};

    const auto grad = backward(w, topo, all_ones(topo), batch);
    CHECK(grad.weights[0].cwiseAbs().maxCoeff() == 0.0);
    // zero biases keep every hidden unit at the ReLU kink, so only the output
    // layer sees any signal
    CHECK(grad.biases[1].cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("loss_and_gradient bundles the two single calls") {
    const MaskedTopology topo = MaskedTopology::unit_mlp({3, 4, 2});
    Rng rng = make_rng(71, 1);
    const auto w = he_init<double>(topo, rng);
    const Batch batch = random_batch(topo, 6, 5);
    StructureMask mask = all_ones(topo);
    mask.bits[2] = 0;

    const auto [loss, grad] = loss_and_gradient(w, topo, mask, batch);
    CHECK(loss == cross_entropy_loss(forward(w, topo, mask, batch.inputs),
                                     std::span<const int>(batch.labels)));
    const auto direct = backward(w, topo, mask, batch);
    for (std::size_t l = 0; l < grad.weights.size(); ++l) {
        CHECK(grad.weights[l] == direct.weights[l]);
        CHECK(grad.biases[l] == direct.biases[l]);
    }
}

TEST_CASE("averaged gradient is the mean of the per-mask gradients") {
    const MaskedTopology topo = MaskedTopology::unit_mlp({3, 3, 2});
    Rng rng = make_rng(73, 1);
    const auto w = he_init<double>(topo, rng);
    const Batch batch = random_batch(topo, 4, 19);

    std::vector<StructureMask> masks{StructureMask{{1, 1, 1}}, StructureMask{{1, 0, 1}}};
    const auto mean = averaged_weight_gradient(w, topo, masks, batch);
    const auto g0 = backward(w, topo, masks[0], batch);
    const auto g1 = backward(w, topo, masks[1], batch);
    for (std::size_t l = 0; l < mean.weights.size(); ++l) {
        const Eigen::MatrixXd want = (g0.weights[l] + g1.weights[l]) * 0.5;
        CHECK(mean.weights[l] == want);
        const Eigen::VectorXd wantb = (g0.biases[l] + g1.biases[l]) * 0.5;
        CHECK(mean.biases[l] == wantb);
    }
    CHECK_THROWS_AS(averaged_weight_gradient(w, topo, {}, batch), std::invalid_argument);
}

TEST_CASE("weight checkpoints round-trip exactly") {
    const MaskedTopology topo = MaskedTopology::unit_mlp({4, 3, 2});
    Rng rng = make_rng(79, 1);
    const auto w = he_init<double>(topo, rng);
    oracle::TempDir dir;
    const auto path = dir.path() / "weights.bin";
    save_weights(w, topo, path);

    {
        std::ifstream in(path, std::ios::binary);
        std::string header;
        REQUIRE(std::getline(in, header));
        CHECK(header == "weights unit:4-3-2 23");
    }

    const auto back = load_weights<double>(topo, path);
    for (std::size_t l = 0; l < w.weights.size(); ++l) {
        CHECK(back.weights[l] == w.weights[l]);
        CHECK(back.biases[l] == w.biases[l]);
    }

    SUBCASE("a different topology is rejected") {
        const MaskedTopology other = MaskedTopology::unit_mlp({4, 4, 2});
        CHECK_THROWS_AS(load_weights<double>(other, path), std::runtime_error);
    }
    SUBCASE("missing and corrupt files are rejected") {
        CHECK_THROWS_AS(load_weights<double>(topo, dir.path() / "absent.bin"),
                        std::runtime_error);
        const auto bad = dir.path() / "bad.bin";
        {
            std::ofstream out(bad, std::ios::binary);
            out << "lattice unit:4-3-2 23\n";
        }
        CHECK_THROWS_AS(load_weights<double>(topo, bad), std::runtime_error);
        const auto cut = dir.path() / "cut.bin";
        {
            std::ofstream out(cut, std::ios::binary);
            out << "weights unit:4-3-2 23\n";
            const double v = 1.5;
            out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
        CHECK_THROWS_AS(load_weights<double>(topo, cut), std::runtime_error);
    }
}

TEST_CASE("the single-precision path tracks the double-precision one") {
    const MaskedTopology topo = MaskedTopology::unit_mlp({4, 5, 3});
    Rng rng_d = make_rng(83, 1);
    Rng rng_f = make_rng(83, 1);
    const auto wd = he_init<double>(topo, rng_d);
    const auto wf = he_init<float>(topo, rng_f);
    const Batch batch = random_batch(topo, 5, 4);
    StructureMask mask = all_ones(topo);
    mask.bits[3] = 0;

    const auto logits_d = forward(wd, topo, mask, batch.inputs);
    const auto logits_f = forward(wf, topo, mask, batch.inputs);
    CHECK((logits_d - logits_f.cast<double>()).cwiseAbs().maxCoeff() < 1e-4);

    const double loss_d = cross_entropy_loss(logits_d, std::span<const int>(batch.labels));
    const double loss_f = cross_entropy_loss(logits_f, std::span<const int>(batch.labels));
    CHECK(loss_f == doctest::Approx(loss_d).epsilon(1e-4));

    oracle::TempDir dir;
    save_weights(wf, topo, dir.path() / "w.bin");
    const auto back = load_weights<float>(topo, dir.path() / "w.bin");
    CHECK(back.weights[0] == wf.weights[0]);
}
