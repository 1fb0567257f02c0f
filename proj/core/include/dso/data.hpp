#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "dso/network.hpp"
#include "dso/rng.hpp"

namespace dso {

/// Labeled classification data; inputs one sample per column, values in [0, 1].
struct Dataset {
    Eigen::MatrixXd inputs;   // feature dim x sample count
    std::vector<int> labels;
    int num_classes = 0;

    int size() const { return static_cast<int>(labels.size()); }
    int feature_dim() const { return static_cast<int>(inputs.rows()); }

    /// First n samples (all of them if n <= 0 or n >= size).
    Dataset take(int n) const;
};

/// Reads an IDX image/label pair (big-endian, magic 2051 / 2049). Pixels are
/// scaled to [0, 1] by dividing by 255. Throws on bad magic, truncation, or
/// an image/label count mismatch.
Dataset load_mnist_idx(const std::filesystem::path& image_path,
                       const std::filesystem::path& label_path);

/// Writes IDX files in the same format; inverse of load_mnist_idx for data
/// whose features are multiples of 1/255.
void save_idx(const Dataset& data, int rows, int cols,
              const std::filesystem::path& image_path,
              const std::filesystem::path& label_path);

/// Binary-label task whose label depends only on the first d_relevant
/// features; the remaining d_noise features are independent uniform noise.
/// Class 1 samples have every relevant feature in (0.5 + margin, 1], class 0
/// in [0, 0.5 - margin), so the Bayes error is zero for positive margin.
Dataset synthetic_subset_task(int d_relevant, int d_noise, int n, Rng& rng,
                              double margin = 0.1);

/// Multi-class stand-in for small image benchmarks: each class has a fixed
/// prototype in [0, 1]^(side*side); samples are the prototype plus Gaussian
/// noise, clipped back into [0, 1]. Prototypes come from proto_rng so that a
/// train and a test split can share the task (same proto_rng state) while
/// drawing disjoint sample noise from their own jitter_rng.
Dataset synthetic_image_task(int side, int num_classes, int n, Rng& proto_rng,
                             Rng& jitter_rng, double noise = 0.25);

/// One seeded-shuffle pass over a dataset in mini-batches; the final partial
/// batch is kept.
class MinibatchStream {
public:
    MinibatchStream(const Dataset& data, int batch_size, std::uint64_t epoch_seed);

    std::optional<Batch> next();
    int batch_count() const;

private:
    const Dataset& data_;
    std::vector<int> order_;
    int batch_size_;
    int cursor_ = 0;
};

/// Iterations one training pass performs: ceil(n / batch_size) per epoch.
long long planned_iterations(long long n_train, int batch_size, int epochs);

} // namespace dso
