#include "dso/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace dso {

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4)) {
        throw std::runtime_error("idx: truncated header in " + path.string());
    }
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

} // namespace

Dataset Dataset::take(int n) const {
    if (n <= 0 || n >= size()) return *this;
    Dataset out;
    out.inputs = inputs.leftCols(n);
    out.labels.assign(labels.begin(), labels.begin() + n);
    out.num_classes = num_classes;
    return out;
}

Dataset load_mnist_idx(const std::filesystem::path& image_path,
                       const std::filesystem::path& label_path) {
    std::ifstream img(image_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open " + image_path.string());
    std::ifstream lab(label_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open " + label_path.string());

    if (read_be32(img, image_path) != kImageMagic) {
        throw std::runtime_error("idx: bad image magic in " + image_path.string());
    }
    const std::uint32_t n_images = read_be32(img, image_path);
    const std::uint32_t rows = read_be32(img, image_path);
    const std::uint32_t cols = read_be32(img, image_path);

    if (read_be32(lab, label_path) != kLabelMagic) {
        throw std::runtime_error("idx: bad label magic in " + label_path.string());
    }
    const std::uint32_t n_labels = read_be32(lab, label_path);
    if (n_images != n_labels) {
        throw std::runtime_error("idx: image/label count mismatch between " +
                                 image_path.string() + " and " + label_path.string());
    }

    const std::size_t pixels = std::size_t(rows) * cols;
    Dataset data;
    data.inputs.resize(static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(n_images));
    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels))) {
            throw std::runtime_error("idx: truncated image data in " + image_path.string());
        }
        for (std::size_t p = 0; p < pixels; ++p) {
            data.inputs(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i)) =
                static_cast<double>(buf[p]) / 255.0;
        }
    }

    data.labels.resize(n_labels);
    std::vector<unsigned char> lbuf(n_labels);
    if (n_labels > 0 &&
        !lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(n_labels))) {
        throw std::runtime_error("idx: truncated label data in " + label_path.string());
    }
    int max_label = 0;
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        data.labels[i] = static_cast<int>(lbuf[i]);
        max_label = std::max(max_label, data.labels[i]);
    }
    data.num_classes = std::max(max_label + 1, 10);
    return data;
}

void save_idx(const Dataset& data, int rows, int cols,
              const std::filesystem::path& image_path,
              const std::filesystem::path& label_path) {
    if (static_cast<long long>(rows) * cols != data.feature_dim()) {
        throw std::invalid_argument("save_idx: rows*cols must equal the feature dimension");
    }
    std::ofstream img(image_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open " + image_path.string());
    write_be32(img, kImageMagic);
    write_be32(img, static_cast<std::uint32_t>(data.size()));
    write_be32(img, static_cast<std::uint32_t>(rows));
    write_be32(img, static_cast<std::uint32_t>(cols));
    for (int i = 0; i < data.size(); ++i) {
        for (int p = 0; p < data.feature_dim(); ++p) {
            const double v = data.inputs(p, i) * 255.0;
            img.put(static_cast<char>(static_cast<unsigned char>(std::lround(v))));
        }
    }

    std::ofstream lab(label_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open " + label_path.string());
    write_be32(lab, kLabelMagic);
    write_be32(lab, static_cast<std::uint32_t>(data.size()));
    for (int label : data.labels) {
        lab.put(static_cast<char>(static_cast<unsigned char>(label)));
    }
}

Dataset synthetic_subset_task(int d_relevant, int d_noise, int n, Rng& rng, double margin) {
    if (d_relevant < 1 || d_noise < 0 || n < 1) {
        throw std::invalid_argument("synthetic_subset_task: sizes must be positive");
    }
    if (!(margin >= 0.0 && margin < 0.5)) {
        throw std::invalid_argument("synthetic_subset_task: margin must lie in [0, 0.5)");
    }
    const int dim = d_relevant + d_noise;
    Dataset data;
    data.inputs.resize(dim, n);
    data.labels.resize(static_cast<std::size_t>(n));
    data.num_classes = 2;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < n; ++i) {
        const int label = coin(rng) ? 1 : 0;
        data.labels[static_cast<std::size_t>(i)] = label;
        for (int f = 0; f < d_relevant; ++f) {
            const double span = 0.5 - margin;
            const double u = unit(rng) * span;
            data.inputs(f, i) = label == 1 ? 1.0 - u : u;
        }
        for (int f = d_relevant; f < dim; ++f) {
            data.inputs(f, i) = unit(rng);
        }
    }
    return data;
}

Dataset synthetic_image_task(int side, int num_classes, int n, Rng& proto_rng,
                             Rng& jitter_rng, double noise) {
    if (side < 1 || num_classes < 2 || n < 1) {
        throw std::invalid_argument("synthetic_image_task: sizes must be positive");
    }
    const int dim = side * side;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, noise);

    Eigen::MatrixXd prototypes(dim, num_classes);
    for (int k = 0; k < num_classes; ++k) {
        for (int p = 0; p < dim; ++p) prototypes(p, k) = unit(proto_rng);
    }

    Dataset data;
    data.inputs.resize(dim, n);
    data.labels.resize(static_cast<std::size_t>(n));
    data.num_classes = num_classes;
    for (int i = 0; i < n; ++i) {
        const int label = i % num_classes;
        data.labels[static_cast<std::size_t>(i)] = label;
        for (int p = 0; p < dim; ++p) {
            data.inputs(p, i) = std::clamp(prototypes(p, label) + jitter(jitter_rng), 0.0, 1.0);
        }
    }
    return data;
}

MinibatchStream::MinibatchStream(const Dataset& data, int batch_size, std::uint64_t epoch_seed)
    : data_(data), batch_size_(batch_size) {
    if (batch_size < 1) {
        throw std::invalid_argument("MinibatchStream: batch size must be >= 1");
    }
    order_.resize(static_cast<std::size_t>(data.size()));
    std::iota(order_.begin(), order_.end(), 0);
    Rng rng = make_rng(epoch_seed, 0);
    std::shuffle(order_.begin(), order_.end(), rng);
}

std::optional<Batch> MinibatchStream::next() {
    if (cursor_ >= data_.size()) return std::nullopt;
    const int count = std::min(batch_size_, data_.size() - cursor_);
    Batch batch;
    batch.inputs.resize(data_.feature_dim(), count);
    batch.labels.resize(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
        const int idx = order_[static_cast<std::size_t>(cursor_ + j)];
        batch.inputs.col(j) = data_.inputs.col(idx);
        batch.labels[static_cast<std::size_t>(j)] = data_.labels[static_cast<std::size_t>(idx)];
    }
    cursor_ += count;
    return batch;
}

int MinibatchStream::batch_count() const {
    return static_cast<int>((data_.size() + batch_size_ - 1) / batch_size_);
}

long long planned_iterations(long long n_train, int batch_size, int epochs) {
    if (n_train < 1 || batch_size < 1 || epochs < 1) {
        throw std::invalid_argument("planned_iterations: arguments must be positive");
    }
    return static_cast<long long>(epochs) * ((n_train + batch_size - 1) / batch_size);
}

} // namespace dso
