#include "dso/sgd.hpp"

#include <stdexcept>

#include "dso/errors.hpp"

namespace dso {

template <class S>
OptimizerState<S> OptimizerState<S>::init(const MaskedTopology& topology, double momentum,
                                          double weight_decay, double lr0) {
    if (momentum < 0.0 || momentum >= 1.0) {
        throw std::invalid_argument("OptimizerState: momentum must lie in [0, 1)");
    }
    if (weight_decay < 0.0) {
        throw std::invalid_argument("OptimizerState: weight decay must be >= 0");
    }
    OptimizerState<S> state;
    state.velocity = WeightStore<S>::zeros(topology);
    state.momentum = momentum;
    state.weight_decay = weight_decay;
    state.lr0 = lr0;
    state.lr = lr0;
    return state;
}

namespace {

template <class M, class S>
void nesterov_update(M& param, const M& grad, M& velocity, S mu, S lr, S decay) {
    M g = grad;
    if (decay != S(0)) g += decay * param;
    velocity = mu * velocity - lr * g;
    param += mu * velocity - lr * g;
}

} // namespace

template <class S>
void sgd_step(WeightStore<S>& weights, const WeightStore<S>& grads, OptimizerState<S>& state) {
    if (weights.weights.size() != grads.weights.size()) {
        throw std::invalid_argument("sgd_step: weight/gradient layer count mismatch");
    }
    const S mu = static_cast<S>(state.momentum);
    const S lr = static_cast<S>(state.lr);
    const S decay = static_cast<S>(state.weight_decay);
    for (std::size_t l = 0; l < weights.weights.size(); ++l) {
        if (!grads.weights[l].allFinite() || !grads.biases[l].allFinite()) {
            throw DivergedError("sgd_step: non-finite gradient");
        }
        nesterov_update(weights.weights[l], grads.weights[l], state.velocity.weights[l], mu, lr,
                        decay);
        nesterov_update(weights.biases[l], grads.biases[l], state.velocity.biases[l], mu, lr,
                        state.decay_biases ? decay : S(0));
    }
}

double lr_schedule(double lr0, int epoch, int total_epochs) {
    if (epoch < 0 || epoch >= total_epochs) {
        throw std::invalid_argument("lr_schedule: epoch out of range");
    }
    if (epoch < total_epochs / 2) return lr0;
    if (epoch < 3 * total_epochs / 4) return lr0 / 10.0;
    return lr0 / 100.0;
}

template struct OptimizerState<float>;
template struct OptimizerState<double>;

template void sgd_step<float>(WeightStore<float>&, const WeightStore<float>&,
                              OptimizerState<float>&);
template void sgd_step<double>(WeightStore<double>&, const WeightStore<double>&,
                               OptimizerState<double>&);

} // namespace dso
