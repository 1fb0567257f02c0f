#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dso/data.hpp"
#include "dso/topology.hpp"
#include "dso/trainer.hpp"

namespace dso {

enum class TaskKind { Unit, Connection, BlackBox };
enum class DatasetKind { Mnist, SyntheticImages, SyntheticSubset };
enum class Precision { Float64, Float32 };

/// Flat key=value experiment description. Every key is listed in the README;
/// unknown keys are rejected rather than ignored.
struct ExperimentConfig {
    TaskKind task = TaskKind::Unit;
    std::vector<int> widths;  ///< unit: full chain; connection: input, growth, output
    int block_layers = 0;     ///< connection mode: hidden layers inside the block

    int epochs = 1;
    int batch = 32;
    int lambda = 2;
    double lr0 = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    bool decay_biases = true;
    double eta_theta = 0.0;  ///< 0 selects 1/d (eta_theta_mode = 1/d)
    double theta_init = 0.5;
    int eval_every = 1;
    Precision precision = Precision::Float64;

    std::vector<double> eps_primes;       ///< parsed values
    std::vector<std::string> eps_tokens;  ///< verbatim spellings, for artifact names
    std::vector<std::uint64_t> seeds;

    DatasetKind dataset = DatasetKind::Mnist;
    std::string train_images, train_labels, test_images, test_labels;
    int train_limit = 0;  ///< 0 keeps everything
    int test_limit = 0;

    // synthetic generators
    int side = 28;
    int classes = 10;
    int train_n = 6000;
    int test_n = 1000;
    int d_relevant = 10;
    int d_noise = 10;
    double margin = 0.1;
    double noise = 0.25;
    std::uint64_t data_seed = 12345;

    // black-box benchmark (task = blackbox)
    int bb_dim = 20;
    int bb_relevant = 20;  ///< the first bb_relevant bits are relevant
    long long bb_iterations = 20000;
};

/// Parses "2^-6", "-2^-3", "-2^0", "0", or any plain decimal.
double parse_eps_token(const std::string& token);

/// Parses key=value lines ('#' starts a comment). Unknown keys throw.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Environment variable consulted when dataset paths are relative or absent.
inline constexpr const char* kDataRootEnvVar = "DSO_DATA_ROOT";

/// Resolves a dataset path against the data-root environment variable.
std::filesystem::path resolve_data_path(const std::string& path);

MaskedTopology topology_from_config(const ExperimentConfig& config);
Dataset load_train_data(const ExperimentConfig& config);
Dataset load_test_data(const ExperimentConfig& config);

/// One sweep entry's end-of-run measurements.
struct SummaryRow {
    double eps_prime = 0.0;
    std::string eps_token;
    std::uint64_t seed = 0;
    double final_test_error = 0.0;
    double final_usage_rate = 0.0;
    std::vector<int> per_layer_counts;
};

/// summary.csv: eps_prime,seed,final_test_error,final_usage_rate,per_layer_counts
/// with the counts semicolon-joined.
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);
std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path);

/// Single training run; artifacts (history.csv, epochs.csv, theta.txt,
/// weights.bin) land directly in out_dir. Returns the process exit status.
int run_single(const ExperimentConfig& config, const std::filesystem::path& out_dir,
               std::optional<std::uint64_t> seed_override);

/// Full eps x seed grid. Each entry writes its artifacts under
/// out_dir/eps_<token>/seed_<seed>/; summary.csv plus the summarize outputs
/// are written at the top level. Entries run concurrently up to jobs threads.
int run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir, int jobs,
              std::optional<std::uint64_t> seed_override);

/// Black-box benchmark runs (task = blackbox) over the same eps x seed grid.
int run_bench(const ExperimentConfig& config, const std::filesystem::path& out_dir,
              std::optional<std::uint64_t> seed_override);

/// Reads out_dir/summary.csv and writes tradeoff.csv (per-eps medians and
/// 25%/75% quantiles, rows sorted by eps descending) and per_layer_table.txt
/// (per-eps median selected counts). Idempotent. Throws when no summary exists.
int summarize_outputs(const std::filesystem::path& out_dir);

} // namespace dso
