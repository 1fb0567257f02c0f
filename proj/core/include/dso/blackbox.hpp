#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "dso/bernoulli.hpp"

namespace dso {

/// Loss assigned to a whole mask; smaller is better.
using MaskLoss = std::function<double(const StructureMask&)>;

/// Number of relevant bits that are off: sum over i in R of (1 - m_i).
/// Minimized (at 0) by any mask with every relevant bit set; bits outside R
/// never influence the value. Indices are zero-based.
double subset_count_loss(const StructureMask& mask, std::span<const int> relevant);

struct BlackBoxConfig {
    int dim = 0;
    int lambda = 2;
    double theta_lr = 0.0;  ///< <= 0 selects 1/d
    double theta_init = 0.5;
    long long iterations = 0;
    std::uint64_t seed = 1;
    bool record_trajectory = false;  ///< keep a full theta snapshot per iteration
};

struct BlackBoxResult {
    BernoulliTheta theta;
    std::vector<std::vector<double>> trajectory;  // filled when record_trajectory
};

/// Drives the penalized theta update against a deterministic mask loss, with
/// no network and no data: per iteration sample lambda masks, rank their
/// losses, step theta, clamp. c must have dim entries.
BlackBoxResult run_black_box(const BlackBoxConfig& config, const MaskLoss& loss,
                             std::span<const double> c, double eps_prime);

/// trajectory.csv: iteration, then one column per coordinate.
void write_trajectory_csv(const BlackBoxResult& result, const std::filesystem::path& path);

} // namespace dso
