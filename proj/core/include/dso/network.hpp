#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "dso/rng.hpp"
#include "dso/topology.hpp"

namespace dso {

/// One mini-batch: inputs are stored one sample per column.
struct Batch {
    Eigen::MatrixXd inputs;   // feature dim x batch size
    std::vector<int> labels;  // class indices, one per column

    int size() const { return static_cast<int>(labels.size()); }
};

/// Weight matrices and bias vectors for every target layer. The matrix of
/// target t has layer_width(t) rows and concat_width(t) columns; segment
/// slices of gated sources occupy the column ranges given by the topology.
/// Doubles as the gradient container.
template <class S>
struct WeightStore {
    using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    static WeightStore zeros(const MaskedTopology& topology);
    long long param_count() const;
    void set_zero();
};

/// He initialization: weights ~ Normal(0, 2 / fan_in) with fan_in the full
/// concatenated input width of the layer; biases start at zero.
template <class S>
WeightStore<S> he_init(const MaskedTopology& topology, Rng& rng);

/// Masked forward pass. Hidden activations are ReLU; in unit mode each hidden
/// unit's output is multiplied by its mask bit, in connection mode a zero bit
/// removes the whole source slice from the target's input. Returns pre-softmax
/// logits (classes x batch).
template <class S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> forward(
    const WeightStore<S>& weights, const MaskedTopology& topology, const StructureMask& mask,
    const Eigen::MatrixXd& inputs);

/// Mean over the batch of -log softmax(logits)[label], computed with the
/// usual max-shift. Throws DivergedError when any logit is non-finite.
template <class S>
double cross_entropy_loss(const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& logits,
                          std::span<const int> labels);

/// Column-stochastic softmax of the logits, in double precision.
template <class S>
Eigen::MatrixXd class_probabilities(
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& logits);

/// Exact gradient of cross_entropy_loss(forward(...)) with respect to every
/// weight and bias. Parameters gated off by the mask get exactly zero.
template <class S>
WeightStore<S> backward(const WeightStore<S>& weights, const MaskedTopology& topology,
                        const StructureMask& mask, const Batch& batch);

/// Loss and gradient from one shared forward pass.
template <class S>
std::pair<double, WeightStore<S>> loss_and_gradient(const WeightStore<S>& weights,
                                                    const MaskedTopology& topology,
                                                    const StructureMask& mask,
                                                    const Batch& batch);

/// Arithmetic mean of the per-mask gradients, every mask evaluated on the
/// same mini-batch.
template <class S>
WeightStore<S> averaged_weight_gradient(const WeightStore<S>& weights,
                                        const MaskedTopology& topology,
                                        const std::vector<StructureMask>& masks,
                                        const Batch& batch);

/// Binary checkpoint: text header "weights <topology> <count>\n" followed by
/// count little-endian 64-bit values (weights row-major, then biases, per layer).
template <class S>
void save_weights(const WeightStore<S>& weights, const MaskedTopology& topology,
                  const std::filesystem::path& path);

template <class S>
WeightStore<S> load_weights(const MaskedTopology& topology, const std::filesystem::path& path);

extern template struct WeightStore<float>;
extern template struct WeightStore<double>;

} // namespace dso
