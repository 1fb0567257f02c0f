#include "dso/bernoulli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dso/errors.hpp"

namespace dso {

int StructureMask::count_ones() const {
    return static_cast<int>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

BernoulliTheta::BernoulliTheta(std::size_t dim, double init_value)
    : BernoulliTheta(std::vector<double>(dim, init_value)) {}

BernoulliTheta::BernoulliTheta(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.size() < 3) {
        throw std::invalid_argument("BernoulliTheta: dimension must be >= 3, got " +
                                    std::to_string(probs_.size()));
    }
    for (double p : probs_) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("BernoulliTheta: probabilities must lie in [0, 1]");
        }
    }
}

double BernoulliTheta::mean() const {
    return std::accumulate(probs_.begin(), probs_.end(), 0.0) /
           static_cast<double>(probs_.size());
}

StructureMask sample_mask(const BernoulliTheta& theta, Rng& rng) {
    StructureMask mask;
    mask.bits.resize(theta.dim());
    for (std::size_t i = 0; i < theta.dim(); ++i) {
        std::bernoulli_distribution bit(theta[i]);
        mask.bits[i] = bit(rng) ? 1 : 0;
    }
    return mask;
}

std::vector<StructureMask> sample_masks(const BernoulliTheta& theta, int lambda, Rng& rng) {
    if (lambda < 2) {
        throw std::invalid_argument("sample_masks: lambda must be >= 2, got " +
                                    std::to_string(lambda));
    }
    std::vector<StructureMask> masks;
    masks.reserve(static_cast<std::size_t>(lambda));
    for (int s = 0; s < lambda; ++s) masks.push_back(sample_mask(theta, rng));
    return masks;
}

UtilityVector compute_utilities(const std::vector<double>& losses) {
    const std::size_t lambda = losses.size();
    if (lambda < 2) {
        throw std::invalid_argument("compute_utilities: need at least 2 losses");
    }
    for (double l : losses) {
        if (!std::isfinite(l)) {
            throw DivergedError("compute_utilities: non-finite loss, forward pass diverged");
        }
    }

    const std::size_t quarter = (lambda + 3) / 4; // ceil(lambda / 4)

    // Utility of each rank slot, best first.
    std::vector<double> slot(lambda, 0.0);
    for (std::size_t k = 0; k < quarter; ++k) {
        slot[k] = 1.0;
        slot[lambda - 1 - k] = -1.0;
    }

    std::vector<std::size_t> order(lambda);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });

    // Tied losses share the mean utility of the slots they occupy.
    UtilityVector utilities(lambda, 0.0);
    std::size_t pos = 0;
    while (pos < lambda) {
        std::size_t end = pos + 1;
        while (end < lambda && losses[order[end]] == losses[order[pos]]) ++end;
        double sum = 0.0;
        for (std::size_t k = pos; k < end; ++k) sum += slot[k];
        const double shared = sum / static_cast<double>(end - pos);
        for (std::size_t k = pos; k < end; ++k) utilities[order[k]] = shared;
        pos = end;
    }
    return utilities;
}

double normalize_epsilon(double eps_prime, std::span<const double> c) {
    if (c.empty()) {
        throw std::invalid_argument("normalize_epsilon: empty coefficient vector");
    }
    const double cmax = *std::max_element(c.begin(), c.end());
    if (!(cmax > 0.0)) {
        throw std::invalid_argument("normalize_epsilon: max(c) must be positive");
    }
    return eps_prime / cmax;
}

std::vector<double> penalty_natural_gradient(const BernoulliTheta& theta,
                                             std::span<const double> c, double eps) {
    if (c.size() != theta.dim()) {
        throw std::invalid_argument("penalty_natural_gradient: dimension mismatch");
    }
    std::vector<double> grad(theta.dim());
    for (std::size_t i = 0; i < theta.dim(); ++i) {
        grad[i] = eps * c[i] * theta[i] * (1.0 - theta[i]);
    }
    return grad;
}

namespace {

std::vector<double> utility_gradient(const BernoulliTheta& theta,
                                     const std::vector<StructureMask>& masks,
                                     const UtilityVector& utilities) {
    if (masks.size() != utilities.size()) {
        throw std::invalid_argument("update_theta: masks/utilities size mismatch");
    }
    const double lambda = static_cast<double>(masks.size());
    std::vector<double> grad(theta.dim(), 0.0);
    for (std::size_t s = 0; s < masks.size(); ++s) {
        if (masks[s].dim() != theta.dim()) {
            throw std::invalid_argument("update_theta: mask dimension mismatch");
        }
        const double w = utilities[s] / lambda;
        if (w == 0.0) continue;
        for (std::size_t i = 0; i < theta.dim(); ++i) {
            grad[i] += w * (static_cast<double>(masks[s].bits[i]) - theta[i]);
        }
    }
    return grad;
}

} // namespace

BernoulliTheta update_theta(const BernoulliTheta& theta,
                            const std::vector<StructureMask>& masks,
                            const UtilityVector& utilities,
                            std::span<const double> c, double eps, double eta) {
    if (c.size() != theta.dim()) {
        throw std::invalid_argument("update_theta: coefficient dimension mismatch");
    }
    std::vector<double> grad = utility_gradient(theta, masks, utilities);
    std::vector<double> raw(theta.dim());
    for (std::size_t i = 0; i < theta.dim(); ++i) {
        grad[i] -= eps * c[i] * theta[i] * (1.0 - theta[i]);
        raw[i] = theta[i] + eta * grad[i];
    }
    return clamp_theta(raw, theta.dim());
}

BernoulliTheta update_theta_baseline(const BernoulliTheta& theta,
                                     const std::vector<StructureMask>& masks,
                                     const UtilityVector& utilities, double eta) {
    std::vector<double> grad = utility_gradient(theta, masks, utilities);
    std::vector<double> raw(theta.dim());
    for (std::size_t i = 0; i < theta.dim(); ++i) {
        raw[i] = theta[i] + eta * grad[i];
    }
    return clamp_theta(raw, theta.dim());
}

BernoulliTheta clamp_theta(std::span<const double> raw, std::size_t dim) {
    if (raw.size() != dim) {
        throw std::invalid_argument("clamp_theta: dimension mismatch");
    }
    const double lo = 1.0 / static_cast<double>(dim);
    const double hi = 1.0 - lo;
    std::vector<double> probs(raw.begin(), raw.end());
    for (double& p : probs) p = std::clamp(p, lo, hi);
    return BernoulliTheta(std::move(probs));
}

StructureMask deterministic_mask(std::span<const double> probs) {
    StructureMask mask;
    mask.bits.resize(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        mask.bits[i] = probs[i] >= 0.5 ? 1 : 0;
    }
    return mask;
}

StructureMask deterministic_mask(const BernoulliTheta& theta) {
    return deterministic_mask(std::span<const double>(theta.probs()));
}

void save_theta(const BernoulliTheta& theta, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_theta: cannot open " + path.string());
    }
    out << "theta " << theta.dim() << "\n";
    out.precision(17);
    for (double p : theta.probs()) out << p << "\n";
    if (!out) {
        throw std::runtime_error("save_theta: write failed for " + path.string());
    }
}

BernoulliTheta load_theta(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_theta: cannot open " + path.string());
    }
    std::string tag;
    std::size_t dim = 0;
    if (!(in >> tag >> dim) || tag != "theta") {
        throw std::runtime_error("load_theta: bad header in " + path.string());
    }
    std::vector<double> probs(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        if (!(in >> probs[i])) {
            throw std::runtime_error("load_theta: truncated file " + path.string());
        }
    }
    return BernoulliTheta(std::move(probs));
}

} // namespace dso
