#include "dso/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dso/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "weight checkpoints assume a little-endian host");

namespace dso {

namespace {

template <class S>
void check_mask(const MaskedTopology& topology, const StructureMask& mask) {
    if (static_cast<int>(mask.dim()) != topology.mask_dim()) {
        throw std::invalid_argument("forward: mask dimension does not match topology");
    }
}

template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> unit_mask_vector(const MaskedTopology& topology,
                                                     const StructureMask& mask, int hidden_layer) {
    auto [begin, end] = topology.unit_bit_range(hidden_layer);
    Eigen::Matrix<S, Eigen::Dynamic, 1> v(end - begin);
    for (int i = begin; i < end; ++i) {
        v[i - begin] = static_cast<S>(mask.bits[static_cast<std::size_t>(i)]);
    }
    return v;
}

/// Runs the masked forward pass and keeps every layer's activations.
/// acts[0] is the input; acts[t] for hidden targets is the post-mask ReLU
/// output; acts[T] holds the raw logits.
template <class S>
std::vector<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> forward_activations(
    const WeightStore<S>& weights, const MaskedTopology& topology, const StructureMask& mask,
    const Eigen::MatrixXd& inputs) {
    using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    check_mask<S>(topology, mask);
    if (inputs.rows() != topology.input_width()) {
        throw std::invalid_argument("forward: input feature dimension mismatch");
    }

    const int T = topology.target_count();
    const auto n = inputs.cols();
    std::vector<Matrix> acts(static_cast<std::size_t>(T) + 1);
    acts[0] = inputs.cast<S>();

    for (int t = 1; t <= T; ++t) {
        const auto& W = weights.weights[static_cast<std::size_t>(t) - 1];
        const auto& b = weights.biases[static_cast<std::size_t>(t) - 1];
        Matrix z = b.replicate(1, n);
        for (const auto& seg : topology.incoming(t)) {
            if (seg.bit >= 0 && !mask.bits[static_cast<std::size_t>(seg.bit)]) continue;
            z.noalias() += W.middleCols(seg.offset, seg.width) * acts[static_cast<std::size_t>(seg.source)];
        }
        if (t < T) {
            Matrix a = z.cwiseMax(S(0));
            if (topology.mode() == MaskMode::Unit) {
                a.array().colwise() *= unit_mask_vector<S>(topology, mask, t - 1).array();
            }
            acts[static_cast<std::size_t>(t)] = std::move(a);
        } else {
            acts[static_cast<std::size_t>(t)] = std::move(z);
        }
    }
    return acts;
}

/// softmax(logits) - onehot(labels), scaled by 1/batch: the logit gradient of
/// the batch-mean cross entropy. Also reports the loss.
template <class S>
std::pair<double, Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> loss_and_logit_gradient(
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& logits, std::span<const int> labels) {
    using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    const auto n = logits.cols();
    if (static_cast<std::size_t>(n) != labels.size()) {
        throw std::invalid_argument("cross_entropy_loss: logits/labels size mismatch");
    }
    if (n == 0) {
        throw std::invalid_argument("cross_entropy_loss: empty batch");
    }
    if (!logits.allFinite()) {
        throw DivergedError("cross_entropy_loss: non-finite logits");
    }

    Matrix grad(logits.rows(), n);
    double loss = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const int label = labels[static_cast<std::size_t>(j)];
        if (label < 0 || label >= logits.rows()) {
            throw std::invalid_argument("cross_entropy_loss: label out of range");
        }
        const S shift = logits.col(j).maxCoeff();
        Eigen::Array<S, Eigen::Dynamic, 1> e = (logits.col(j).array() - shift).exp();
        const S total = e.sum();
        grad.col(j) = (e / (total * static_cast<S>(n))).matrix();
        grad(label, j) -= S(1) / static_cast<S>(n);
        loss += static_cast<double>(std::log(static_cast<double>(total))) +
                static_cast<double>(shift) - static_cast<double>(logits(label, j));
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss)) {
        throw DivergedError("cross_entropy_loss: non-finite loss");
    }
    return {loss, std::move(grad)};
}

} // namespace

template <class S>
WeightStore<S> WeightStore<S>::zeros(const MaskedTopology& topology) {
    WeightStore<S> store;
    for (int t = 1; t <= topology.target_count(); ++t) {
        store.weights.emplace_back(
            Matrix::Zero(topology.layer_width(t), topology.concat_width(t)));
        store.biases.emplace_back(Vector::Zero(topology.layer_width(t)));
    }
    return store;
}

template <class S>
long long WeightStore<S>::param_count() const {
    long long n = 0;
    for (const auto& W : weights) n += static_cast<long long>(W.size());
    for (const auto& b : biases) n += static_cast<long long>(b.size());
    return n;
}

template <class S>
void WeightStore<S>::set_zero() {
    for (auto& W : weights) W.setZero();
    for (auto& b : biases) b.setZero();
}

template <class S>
WeightStore<S> he_init(const MaskedTopology& topology, Rng& rng) {
    WeightStore<S> store = WeightStore<S>::zeros(topology);
    for (int t = 1; t <= topology.target_count(); ++t) {
        auto& W = store.weights[static_cast<std::size_t>(t) - 1];
        const double stddev = std::sqrt(2.0 / static_cast<double>(topology.concat_width(t)));
        std::normal_distribution<double> normal(0.0, stddev);
        for (Eigen::Index r = 0; r < W.rows(); ++r) {
            for (Eigen::Index c = 0; c < W.cols(); ++c) {
                W(r, c) = static_cast<S>(normal(rng));
            }
        }
    }
    return store;
}

template <class S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> forward(
    const WeightStore<S>& weights, const MaskedTopology& topology, const StructureMask& mask,
    const Eigen::MatrixXd& inputs) {
    auto acts = forward_activations(weights, topology, mask, inputs);
    return std::move(acts.back());
}

template <class S>
double cross_entropy_loss(const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& logits,
                          std::span<const int> labels) {
    return loss_and_logit_gradient(logits, labels).first;
}

template <class S>
Eigen::MatrixXd class_probabilities(
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& logits) {
    Eigen::MatrixXd probs(logits.rows(), logits.cols());
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        Eigen::VectorXd col = logits.col(j).template cast<double>();
        Eigen::ArrayXd e = (col.array() - col.maxCoeff()).exp();
        probs.col(j) = (e / e.sum()).matrix();
    }
    return probs;
}

template <class S>
std::pair<double, WeightStore<S>> loss_and_gradient(const WeightStore<S>& weights,
                                                    const MaskedTopology& topology,
                                                    const StructureMask& mask,
                                                    const Batch& batch) {
    using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    const int T = topology.target_count();
    auto acts = forward_activations(weights, topology, mask, batch.inputs);
    auto [loss, dlogits] = loss_and_logit_gradient(acts.back(), std::span<const int>(batch.labels));

    WeightStore<S> grads = WeightStore<S>::zeros(topology);
    std::vector<Matrix> dacts(static_cast<std::size_t>(T));
    for (int t = 1; t < T; ++t) {
        dacts[static_cast<std::size_t>(t)] =
            Matrix::Zero(topology.layer_width(t), batch.inputs.cols());
    }

    for (int t = T; t >= 1; --t) {
        Matrix dz;
        if (t == T) {
            dz = std::move(dlogits);
        } else {
            // Post-mask ReLU output is positive exactly where the unit was
            // active and its pre-activation positive, so the stored activation
            // doubles as the derivative indicator.
            const auto& a = acts[static_cast<std::size_t>(t)];
            dz = dacts[static_cast<std::size_t>(t)].cwiseProduct(
                (a.array() > S(0)).template cast<S>().matrix());
        }
        auto& dW = grads.weights[static_cast<std::size_t>(t) - 1];
        grads.biases[static_cast<std::size_t>(t) - 1] = dz.rowwise().sum();
        const auto& W = weights.weights[static_cast<std::size_t>(t) - 1];
        for (const auto& seg : topology.incoming(t)) {
            if (seg.bit >= 0 && !mask.bits[static_cast<std::size_t>(seg.bit)]) continue;
            dW.middleCols(seg.offset, seg.width).noalias() =
                dz * acts[static_cast<std::size_t>(seg.source)].transpose();
            if (seg.source >= 1) {
                dacts[static_cast<std::size_t>(seg.source)].noalias() +=
                    W.middleCols(seg.offset, seg.width).transpose() * dz;
            }
        }
    }
    return {loss, std::move(grads)};
}

template <class S>
WeightStore<S> backward(const WeightStore<S>& weights, const MaskedTopology& topology,
                        const StructureMask& mask, const Batch& batch) {
    return loss_and_gradient(weights, topology, mask, batch).second;
}

template <class S>
WeightStore<S> averaged_weight_gradient(const WeightStore<S>& weights,
                                        const MaskedTopology& topology,
                                        const std::vector<StructureMask>& masks,
                                        const Batch& batch) {
    if (masks.empty()) {
        throw std::invalid_argument("averaged_weight_gradient: no masks");
    }
    WeightStore<S> mean = WeightStore<S>::zeros(topology);
    for (const auto& mask : masks) {
        WeightStore<S> g = backward(weights, topology, mask, batch);
        for (std::size_t l = 0; l < mean.weights.size(); ++l) {
            mean.weights[l] += g.weights[l];
            mean.biases[l] += g.biases[l];
        }
    }
    const S inv = S(1) / static_cast<S>(masks.size());
    for (std::size_t l = 0; l < mean.weights.size(); ++l) {
        mean.weights[l] *= inv;
        mean.biases[l] *= inv;
    }
    return mean;
}

template <class S>
void save_weights(const WeightStore<S>& weights, const MaskedTopology& topology,
                  const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_weights: cannot open " + path.string());
    }
    out << "weights " << topology.to_string() << ' ' << weights.param_count() << '\n';
    auto put = [&out](double v) {
        char buf[sizeof(double)];
        std::memcpy(buf, &v, sizeof(double));
        out.write(buf, sizeof(double));
    };
    for (std::size_t l = 0; l < weights.weights.size(); ++l) {
        const auto& W = weights.weights[l];
        for (Eigen::Index r = 0; r < W.rows(); ++r) {
            for (Eigen::Index c = 0; c < W.cols(); ++c) put(static_cast<double>(W(r, c)));
        }
        const auto& b = weights.biases[l];
        for (Eigen::Index r = 0; r < b.size(); ++r) put(static_cast<double>(b[r]));
    }
    if (!out) {
        throw std::runtime_error("save_weights: write failed for " + path.string());
    }
}

template <class S>
WeightStore<S> load_weights(const MaskedTopology& topology, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load_weights: cannot open " + path.string());
    }
    std::string header;
    if (!std::getline(in, header)) {
        throw std::runtime_error("load_weights: missing header in " + path.string());
    }
    std::istringstream head(header);
    std::string tag, topo_text;
    long long count = -1;
    if (!(head >> tag >> topo_text >> count) || tag != "weights") {
        throw std::runtime_error("load_weights: bad header in " + path.string());
    }
    if (topo_text != topology.to_string()) {
        throw std::runtime_error("load_weights: checkpoint topology " + topo_text +
                                 " does not match " + topology.to_string());
    }
    WeightStore<S> store = WeightStore<S>::zeros(topology);
    if (count != store.param_count()) {
        throw std::runtime_error("load_weights: parameter count mismatch in " + path.string());
    }
    auto get = [&in, &path]() {
        char buf[sizeof(double)];
        if (!in.read(buf, sizeof(double))) {
            throw std::runtime_error("load_weights: truncated file " + path.string());
        }
        double v;
        std::memcpy(&v, buf, sizeof(double));
        return v;
    };
    for (std::size_t l = 0; l < store.weights.size(); ++l) {
        auto& W = store.weights[l];
        for (Eigen::Index r = 0; r < W.rows(); ++r) {
            for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = static_cast<S>(get());
        }
        auto& b = store.biases[l];
        for (Eigen::Index r = 0; r < b.size(); ++r) b[r] = static_cast<S>(get());
    }
    return store;
}

template struct WeightStore<float>;
template struct WeightStore<double>;

#define DSO_INSTANTIATE_NETWORK(S)                                                            \
    template WeightStore<S> he_init<S>(const MaskedTopology&, Rng&);                          \
    template Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> forward<S>(                     \
        const WeightStore<S>&, const MaskedTopology&, const StructureMask&,                   \
        const Eigen::MatrixXd&);                                                              \
    template double cross_entropy_loss<S>(                                                    \
        const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>&, std::span<const int>);       \
    template Eigen::MatrixXd class_probabilities<S>(                                          \
        const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>&);                             \
    template std::pair<double, WeightStore<S>> loss_and_gradient<S>(                          \
        const WeightStore<S>&, const MaskedTopology&, const StructureMask&, const Batch&);    \
    template WeightStore<S> backward<S>(const WeightStore<S>&, const MaskedTopology&,         \
                                        const StructureMask&, const Batch&);                  \
    template WeightStore<S> averaged_weight_gradient<S>(                                      \
        const WeightStore<S>&, const MaskedTopology&, const std::vector<StructureMask>&,      \
        const Batch&);                                                                        \
    template void save_weights<S>(const WeightStore<S>&, const MaskedTopology&,               \
                                  const std::filesystem::path&);                              \
    template WeightStore<S> load_weights<S>(const MaskedTopology&,                            \
                                            const std::filesystem::path&);

DSO_INSTANTIATE_NETWORK(float)
DSO_INSTANTIATE_NETWORK(double)

#undef DSO_INSTANTIATE_NETWORK

} // namespace dso
