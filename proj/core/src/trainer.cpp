#include "dso/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dso/errors.hpp"

namespace dso {

namespace {

std::uint64_t epoch_shuffle_seed(std::uint64_t seed_shuffle, int epoch) {
    return seed_shuffle + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(epoch + 1);
}

template <class S>
std::vector<int> argmax_columns(const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& m) {
    std::vector<int> out(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        Eigen::Index best = 0;
        m.col(j).maxCoeff(&best);
        out[static_cast<std::size_t>(j)] = static_cast<int>(best);
    }
    return out;
}

} // namespace

template <class S>
TrainResult<S> train(const TrainConfig& config, const Dataset& train_data,
                     const MaskedTopology& topology, const Dataset* test_data) {
    if (config.lambda < 2) throw std::invalid_argument("train: lambda must be >= 2");
    if (config.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (config.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (train_data.size() < 1) throw std::invalid_argument("train: empty training set");
    if (train_data.feature_dim() != topology.input_width()) {
        throw std::invalid_argument("train: dataset feature dim does not match topology input");
    }

    const int d = topology.mask_dim();
    const double eta = config.theta_lr > 0.0 ? config.theta_lr : 1.0 / static_cast<double>(d);
    const ComplexityCoefficients coeffs = coefficients_for(topology);
    const double eps = normalize_epsilon(config.eps_prime, coeffs);

    Rng rng_mask = make_rng(config.seed_mask, 0);
    Rng rng_init = make_rng(config.seed_init, 1);

    TrainResult<S> result{WeightStore<S>::zeros(topology),
                          BernoulliTheta(static_cast<std::size_t>(d), config.theta_init),
                          TrainHistory{},
                          false,
                          {}};
    result.weights = he_init<S>(topology, rng_init);
    OptimizerState<S> opt = OptimizerState<S>::init(topology, config.momentum,
                                                    config.weight_decay, config.lr0);
    opt.decay_biases = config.decay_biases;

    long long iteration = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        opt.lr = lr_schedule(config.lr0, epoch, config.epochs);
        MinibatchStream batches(train_data, config.batch_size,
                                epoch_shuffle_seed(config.seed_shuffle, epoch));
        while (auto batch = batches.next()) {
            std::vector<StructureMask> masks = sample_masks(result.theta, config.lambda, rng_mask);

            std::vector<double> losses(masks.size());
            WeightStore<S> grad_sum = WeightStore<S>::zeros(topology);
            try {
                for (std::size_t s = 0; s < masks.size(); ++s) {
                    auto [loss, grad] = loss_and_gradient(result.weights, topology, masks[s], *batch);
                    losses[s] = loss;
                    for (std::size_t l = 0; l < grad_sum.weights.size(); ++l) {
                        grad_sum.weights[l] += grad.weights[l];
                        grad_sum.biases[l] += grad.biases[l];
                    }
                }
            } catch (const DivergedError& err) {
                result.diverged = true;
                result.diverged_reason = err.what();
                return result;
            }

            if (config.loss_transform) {
                for (double& l : losses) l = config.loss_transform(l);
            }

            UtilityVector utilities;
            try {
                utilities = compute_utilities(losses);
            } catch (const DivergedError& err) {
                result.diverged = true;
                result.diverged_reason = err.what();
                return result;
            }

            // Theta moves first, then the weights; both consume the same masks
            // and the same mini-batch.
            result.theta = config.penalty_path
                               ? update_theta(result.theta, masks, utilities, coeffs, eps, eta)
                               : update_theta_baseline(result.theta, masks, utilities, eta);

            const S inv_lambda = S(1) / static_cast<S>(masks.size());
            for (std::size_t l = 0; l < grad_sum.weights.size(); ++l) {
                grad_sum.weights[l] *= inv_lambda;
                grad_sum.biases[l] *= inv_lambda;
            }
            try {
                sgd_step(result.weights, grad_sum, opt);
            } catch (const DivergedError& err) {
                result.diverged = true;
                result.diverged_reason = err.what();
                return result;
            }

            double mean_loss = 0.0;
            for (double l : losses) mean_loss += l;
            mean_loss /= static_cast<double>(losses.size());
            const StructureMask det = deterministic_mask(result.theta);
            result.history.records.push_back(HistoryRecord{
                iteration, epoch, mean_loss, result.theta.mean(),
                weight_usage_rate(topology, det)});
            if (config.record_theta) {
                result.history.theta_snapshots.push_back(result.theta.probs());
            }
            ++iteration;
        }

        const bool last = epoch + 1 == config.epochs;
        if (test_data && config.eval_every > 0 &&
            ((epoch + 1) % config.eval_every == 0 || last)) {
            const double err = evaluate(result.weights, topology,
                                        deterministic_mask(result.theta), *test_data);
            result.history.epoch_test_error.emplace_back(epoch, err);
        }
    }
    return result;
}

template <class S>
std::vector<int> predict_deterministic(const WeightStore<S>& weights,
                                       const MaskedTopology& topology,
                                       const BernoulliTheta& theta,
                                       const Eigen::MatrixXd& inputs) {
    return argmax_columns(forward(weights, topology, deterministic_mask(theta), inputs));
}

template <class S>
Eigen::MatrixXd stochastic_class_probabilities(const WeightStore<S>& weights,
                                               const MaskedTopology& topology,
                                               const BernoulliTheta& theta,
                                               const Eigen::MatrixXd& inputs, int n_samples,
                                               Rng& rng) {
    if (n_samples < 1) {
        throw std::invalid_argument("stochastic_class_probabilities: n_samples must be >= 1");
    }
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(topology.output_width(), inputs.cols());
    for (int s = 0; s < n_samples; ++s) {
        const StructureMask mask = sample_mask(theta, rng);
        mean += class_probabilities(forward(weights, topology, mask, inputs));
    }
    mean /= static_cast<double>(n_samples);
    return mean;
}

template <class S>
std::vector<int> predict_stochastic(const WeightStore<S>& weights,
                                    const MaskedTopology& topology, const BernoulliTheta& theta,
                                    const Eigen::MatrixXd& inputs, int n_samples, Rng& rng) {
    const Eigen::MatrixXd probs =
        stochastic_class_probabilities(weights, topology, theta, inputs, n_samples, rng);
    return argmax_columns<double>(probs);
}

template <class S>
double evaluate(const WeightStore<S>& weights, const MaskedTopology& topology,
                const StructureMask& mask, const Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    constexpr int kChunk = 1024;
    long long wrong = 0;
    for (int start = 0; start < data.size(); start += kChunk) {
        const int count = std::min(kChunk, data.size() - start);
        const Eigen::MatrixXd chunk = data.inputs.middleCols(start, count);
        const auto logits = forward(weights, topology, mask, chunk);
        const auto pred = argmax_columns(logits);
        for (int j = 0; j < count; ++j) {
            if (pred[static_cast<std::size_t>(j)] !=
                data.labels[static_cast<std::size_t>(start + j)]) {
                ++wrong;
            }
        }
    }
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_history_csv: cannot open " + path.string());
    out.precision(17);
    out << "iteration,epoch,mean_sampled_loss,theta_mean,usage_rate\n";
    for (const auto& r : history.records) {
        out << r.iteration << ',' << r.epoch << ',' << r.mean_sampled_loss << ','
            << r.theta_mean << ',' << r.usage_rate << '\n';
    }
}

void write_epoch_error_csv(const TrainHistory& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_epoch_error_csv: cannot open " + path.string());
    out.precision(17);
    out << "epoch,test_error\n";
    for (const auto& [epoch, err] : history.epoch_test_error) {
        out << epoch << ',' << err << '\n';
    }
}

#define DSO_INSTANTIATE_TRAINER(S)                                                           \
    template TrainResult<S> train<S>(const TrainConfig&, const Dataset&,                     \
                                     const MaskedTopology&, const Dataset*);                 \
    template std::vector<int> predict_deterministic<S>(                                      \
        const WeightStore<S>&, const MaskedTopology&, const BernoulliTheta&,                 \
        const Eigen::MatrixXd&);                                                             \
    template Eigen::MatrixXd stochastic_class_probabilities<S>(                              \
        const WeightStore<S>&, const MaskedTopology&, const BernoulliTheta&,                 \
        const Eigen::MatrixXd&, int, Rng&);                                                  \
    template std::vector<int> predict_stochastic<S>(                                         \
        const WeightStore<S>&, const MaskedTopology&, const BernoulliTheta&,                 \
        const Eigen::MatrixXd&, int, Rng&);                                                  \
    template double evaluate<S>(const WeightStore<S>&, const MaskedTopology&,                \
                                const StructureMask&, const Dataset&);

DSO_INSTANTIATE_TRAINER(float)
DSO_INSTANTIATE_TRAINER(double)

#undef DSO_INSTANTIATE_TRAINER

} // namespace dso
