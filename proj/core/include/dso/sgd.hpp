#pragma once

#include "dso/network.hpp"

namespace dso {

/// Velocity buffers plus the hyperparameters of the weight optimizer.
template <class S>
struct OptimizerState {
    WeightStore<S> velocity;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double lr0 = 0.01;
    double lr = 0.01;

    /// Decay acts on biases too by default; the common convention of
    /// excluding them is available behind this switch.
    bool decay_biases = true;

    static OptimizerState init(const MaskedTopology& topology, double momentum,
                               double weight_decay, double lr0);
};

/// One Nesterov step, applied in place to every weight and bias:
///   g' = g + weight_decay * w
///   v  = momentum * v - lr * g'
///   w += momentum * v - lr * g'
/// With momentum = 0 this reduces to plain SGD; with weight_decay = 0 the
/// decay term vanishes bit-exactly.
/// Throws DivergedError when the gradients contain non-finite values.
template <class S>
void sgd_step(WeightStore<S>& weights, const WeightStore<S>& grads, OptimizerState<S>& state);

/// Step schedule: lr0 until floor(E/2), lr0/10 until floor(3E/4), lr0/100 after.
double lr_schedule(double lr0, int epoch, int total_epochs);

extern template struct OptimizerState<float>;
extern template struct OptimizerState<double>;

} // namespace dso
