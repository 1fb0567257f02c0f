#include "dso/blackbox.hpp"

#include <fstream>
#include <stdexcept>

namespace dso {

double subset_count_loss(const StructureMask& mask, std::span<const int> relevant) {
    double loss = 0.0;
    for (int i : relevant) {
        if (i < 0 || static_cast<std::size_t>(i) >= mask.dim()) {
            throw std::invalid_argument("subset_count_loss: relevant index out of range");
        }
        loss += 1.0 - static_cast<double>(mask.bits[static_cast<std::size_t>(i)]);
    }
    return loss;
}

BlackBoxResult run_black_box(const BlackBoxConfig& config, const MaskLoss& loss,
                             std::span<const double> c, double eps_prime) {
    if (config.dim < 3) throw std::invalid_argument("run_black_box: dim must be >= 3");
    if (config.lambda < 2) throw std::invalid_argument("run_black_box: lambda must be >= 2");
    if (config.iterations < 1) {
        throw std::invalid_argument("run_black_box: iterations must be >= 1");
    }
    if (c.size() != static_cast<std::size_t>(config.dim)) {
        throw std::invalid_argument("run_black_box: coefficient dimension mismatch");
    }
    if (!loss) throw std::invalid_argument("run_black_box: empty loss function");

    const double eta =
        config.theta_lr > 0.0 ? config.theta_lr : 1.0 / static_cast<double>(config.dim);
    const double eps = normalize_epsilon(eps_prime, c);
    Rng rng = make_rng(config.seed, 0);

    BlackBoxResult result{BernoulliTheta(static_cast<std::size_t>(config.dim), config.theta_init),
                          {}};
    if (config.record_trajectory) {
        result.trajectory.reserve(static_cast<std::size_t>(config.iterations));
    }
    std::vector<double> losses(static_cast<std::size_t>(config.lambda));
    for (long long it = 0; it < config.iterations; ++it) {
        const std::vector<StructureMask> masks = sample_masks(result.theta, config.lambda, rng);
        for (std::size_t s = 0; s < masks.size(); ++s) losses[s] = loss(masks[s]);
        const UtilityVector utilities = compute_utilities(losses);
        result.theta = update_theta(result.theta, masks, utilities, c, eps, eta);
        if (config.record_trajectory) result.trajectory.push_back(result.theta.probs());
    }
    return result;
}

void write_trajectory_csv(const BlackBoxResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_trajectory_csv: cannot open " + path.string());
    out.precision(17);
    out << "iteration";
    for (std::size_t i = 0; i < result.theta.dim(); ++i) out << ",theta_" << i;
    out << '\n';
    for (std::size_t it = 0; it < result.trajectory.size(); ++it) {
        out << it;
        for (double p : result.trajectory[it]) out << ',' << p;
        out << '\n';
    }
}

} // namespace dso
