#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dso/bernoulli.hpp"
#include "dso/complexity.hpp"
#include "dso/data.hpp"
#include "dso/network.hpp"
#include "dso/sgd.hpp"

namespace dso {

/// Hyperparameters of one training run.
struct TrainConfig {
    int lambda = 2;
    double theta_lr = 0.0;    ///< learning rate for theta; <= 0 selects 1/d
    double eps_prime = 0.0;   ///< penalty strength before normalization by max(c)
    double theta_init = 0.5;
    int batch_size = 32;
    int epochs = 1;
    double lr0 = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    bool decay_biases = true;  ///< apply weight decay to biases as well
    std::uint64_t seed_mask = 1;
    std::uint64_t seed_init = 2;
    std::uint64_t seed_shuffle = 3;

    /// When false the penalty term is never formed and the unpenalized update
    /// rule runs instead. Exists so the two code paths can be compared.
    bool penalty_path = true;

    /// Keep a full theta snapshot per iteration (costly for large d).
    bool record_theta = false;

    /// Applied to the sampled loss values before ranking; identity if empty.
    std::function<double(double)> loss_transform;

    /// Test-set evaluations happen every eval_every epochs (and at the end);
    /// 0 disables them.
    int eval_every = 1;
};

struct HistoryRecord {
    long long iteration;
    int epoch;
    double mean_sampled_loss;
    double theta_mean;
    double usage_rate;  ///< weight usage under the deterministic mask
};

struct TrainHistory {
    std::vector<HistoryRecord> records;
    std::vector<std::pair<int, double>> epoch_test_error;
    std::vector<std::vector<double>> theta_snapshots;  // filled when record_theta
};

template <class S>
struct TrainResult {
    WeightStore<S> weights;
    BernoulliTheta theta;
    TrainHistory history;
    bool diverged = false;
    std::string diverged_reason;
};

/// Runs the joint optimization: per iteration a mini-batch is drawn, lambda
/// masks are sampled, their losses are computed on that one batch, theta is
/// updated by the penalized natural-gradient rule and clamped, then the
/// weights take one SGD step on the mask-averaged gradient. A non-finite loss
/// aborts the run and returns everything collected up to that point.
template <class S>
TrainResult<S> train(const TrainConfig& config, const Dataset& train_data,
                     const MaskedTopology& topology, const Dataset* test_data = nullptr);

/// Class predictions under the most probable mask (theta_i >= 0.5).
template <class S>
std::vector<int> predict_deterministic(const WeightStore<S>& weights,
                                       const MaskedTopology& topology,
                                       const BernoulliTheta& theta,
                                       const Eigen::MatrixXd& inputs);

/// Averaged softmax output over n_samples masks drawn from theta.
template <class S>
Eigen::MatrixXd stochastic_class_probabilities(const WeightStore<S>& weights,
                                               const MaskedTopology& topology,
                                               const BernoulliTheta& theta,
                                               const Eigen::MatrixXd& inputs, int n_samples,
                                               Rng& rng);

/// Argmax of the sample-averaged class probabilities.
template <class S>
std::vector<int> predict_stochastic(const WeightStore<S>& weights,
                                    const MaskedTopology& topology, const BernoulliTheta& theta,
                                    const Eigen::MatrixXd& inputs, int n_samples, Rng& rng);

/// Fraction of the dataset misclassified under a fixed mask.
template <class S>
double evaluate(const WeightStore<S>& weights, const MaskedTopology& topology,
                const StructureMask& mask, const Dataset& data);

/// history.csv: iteration, epoch, mean_sampled_loss, theta_mean, usage_rate.
void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

/// epochs.csv: epoch, test_error.
void write_epoch_error_csv(const TrainHistory& history, const std::filesystem::path& path);

} // namespace dso
