#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dso/rng.hpp"

namespace dso {

/// Binary structure mask M. Bit i switches the i-th gated entity
/// (a hidden unit or an inter-layer connection) on or off.
struct StructureMask {
    std::vector<std::uint8_t> bits;

    std::size_t dim() const { return bits.size(); }
    int count_ones() const;

    bool operator==(const StructureMask&) const = default;
};

/// Parameters of a multivariate Bernoulli distribution over structure masks.
///
/// Coordinates live in [0, 1]; updates clamp them into [1/d, 1-1/d] so that
/// every mask keeps a nonzero sampling probability. Dimensions below 3 are
/// rejected because the clamp interval would not bracket 0.5.
class BernoulliTheta {
public:
    BernoulliTheta(std::size_t dim, double init_value);
    explicit BernoulliTheta(std::vector<double> probs);

    std::size_t dim() const { return probs_.size(); }
    double lower_bound() const { return 1.0 / static_cast<double>(dim()); }
    double upper_bound() const { return 1.0 - 1.0 / static_cast<double>(dim()); }

    const std::vector<double>& probs() const { return probs_; }
    double operator[](std::size_t i) const { return probs_[i]; }
    double mean() const;

private:
    std::vector<double> probs_;
};

/// Ranking-based utilities, one value per sampled mask. Values sum to zero.
using UtilityVector = std::vector<double>;

/// Draws one mask, each bit independently Bernoulli(theta_i).
StructureMask sample_mask(const BernoulliTheta& theta, Rng& rng);

/// Draws lambda masks, each bit independently Bernoulli(theta_i).
/// lambda must be >= 2; the ranking utilities degenerate otherwise.
std::vector<StructureMask> sample_masks(const BernoulliTheta& theta, int lambda, Rng& rng);

/// Turns raw loss values into rank utilities: +1 for the best ceil(lambda/4)
/// losses, -1 for the worst ceil(lambda/4), 0 in between. Tied losses share
/// the arithmetic mean of the utilities of the rank slots they span, so the
/// result always sums to zero. Smaller loss is better.
/// Throws DivergedError if any loss is non-finite.
UtilityVector compute_utilities(const std::vector<double>& losses);

/// Scales the user-facing penalty coefficient so the penalty gradient has
/// the same magnitude regardless of how the complexity weights are encoded:
/// eps = eps_prime / max(c). The sign of eps_prime is preserved.
double normalize_epsilon(double eps_prime, std::span<const double> c);

/// Natural gradient of the expected complexity penalty: eps * c * theta * (1 - theta)
/// elementwise. Each entry is bounded by |eps_prime| / 4 after normalization.
std::vector<double> penalty_natural_gradient(const BernoulliTheta& theta,
                                             std::span<const double> c, double eps);

/// One stochastic natural-gradient step on theta:
///   theta += eta * ( sum_i (u_i / lambda) (M_i - theta) - eps * c * theta * (1 - theta) )
/// followed by the clamp into [1/d, 1-1/d].
BernoulliTheta update_theta(const BernoulliTheta& theta,
                            const std::vector<StructureMask>& masks,
                            const UtilityVector& utilities,
                            std::span<const double> c, double eps, double eta);

/// The unpenalized update: identical to update_theta except that the penalty
/// term is never formed. With eps = 0 both paths produce bit-identical results.
BernoulliTheta update_theta_baseline(const BernoulliTheta& theta,
                                     const std::vector<StructureMask>& masks,
                                     const UtilityVector& utilities, double eta);

/// Projects raw values into [1/d, 1-1/d]; out-of-range coordinates are set to
/// the boundary, in-range coordinates pass through untouched.
BernoulliTheta clamp_theta(std::span<const double> raw, std::size_t dim);

/// Most probable mask: bit i is 1 exactly when probs[i] >= 0.5.
StructureMask deterministic_mask(std::span<const double> probs);
StructureMask deterministic_mask(const BernoulliTheta& theta);

/// Textual checkpoint: header line "theta <d>", then one probability per line.
void save_theta(const BernoulliTheta& theta, const std::filesystem::path& path);
BernoulliTheta load_theta(const std::filesystem::path& path);

} // namespace dso
