#include "dso/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dso/blackbox.hpp"
#include "dso/complexity.hpp"

namespace dso {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string::size_type start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t idx = 0;
        const int v = std::stoi(value, &idx);
        if (idx != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": not an integer: '" + value + "'");
    }
}

long long parse_ll(const std::string& key, const std::string& value) {
    try {
        std::size_t idx = 0;
        const long long v = std::stoll(value, &idx);
        if (idx != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": not an integer: '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t idx = 0;
        const unsigned long long v = std::stoull(value, &idx);
        if (idx != value.size()) throw std::invalid_argument(value);
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": not an unsigned integer: '" +
                                    value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t idx = 0;
        const double v = std::stod(value, &idx);
        if (idx != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": not a number: '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("config key " + key + ": not a boolean: '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    for (const std::string& part : split(value, ',')) {
        out.push_back(parse_int(key, trim(part)));
    }
    return out;
}

std::vector<std::uint64_t> parse_u64_list(const std::string& key, const std::string& value) {
    std::vector<std::uint64_t> out;
    for (const std::string& part : split(value, ',')) {
        out.push_back(parse_u64(key, trim(part)));
    }
    return out;
}

std::string format_full(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

/// Linear-interpolation quantile of a pre-sorted vector, p in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty set");
    const double q = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(q);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = q - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

} // namespace

double parse_eps_token(const std::string& token) {
    const std::string t = trim(token);
    if (t.empty()) throw std::invalid_argument("empty eps_prime token");
    double sign = 1.0;
    std::string body = t;
    if (body.front() == '-') {
        sign = -1.0;
        body = body.substr(1);
    } else if (body.front() == '+') {
        body = body.substr(1);
    }
    // one sign maximum; stod/stoi would quietly absorb a second one
    if (body.empty() || body.front() == '-' || body.front() == '+' ||
        std::isspace(static_cast<unsigned char>(body.front()))) {
        throw std::invalid_argument("bad eps_prime token: '" + t + "'");
    }
    if (body.rfind("2^", 0) == 0) {
        const std::string exp_text = body.substr(2);
        try {
            std::size_t idx = 0;
            const int e = std::stoi(exp_text, &idx);
            if (idx != exp_text.size()) throw std::invalid_argument(exp_text);
            return sign * std::ldexp(1.0, e);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad eps_prime token: '" + t + "'");
        }
    }
    try {
        std::size_t idx = 0;
        const double v = std::stod(body, &idx);
        if (idx != body.size()) throw std::invalid_argument(body);
        return sign * v;
    } catch (const std::exception&) {
        throw std::invalid_argument("bad eps_prime token: '" + t + "'");
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "task") {
            if (value == "unit") cfg.task = TaskKind::Unit;
            else if (value == "connection") cfg.task = TaskKind::Connection;
            else if (value == "blackbox") cfg.task = TaskKind::BlackBox;
            else throw std::invalid_argument("config key task: unknown value '" + value + "'");
        } else if (key == "widths") {
            cfg.widths = parse_int_list(key, value);
        } else if (key == "L_block") {
            cfg.block_layers = parse_int(key, value);
        } else if (key == "epochs") {
            cfg.epochs = parse_int(key, value);
        } else if (key == "batch") {
            cfg.batch = parse_int(key, value);
        } else if (key == "lambda") {
            cfg.lambda = parse_int(key, value);
        } else if (key == "lr0") {
            cfg.lr0 = parse_double(key, value);
        } else if (key == "momentum") {
            cfg.momentum = parse_double(key, value);
        } else if (key == "weight_decay") {
            cfg.weight_decay = parse_double(key, value);
        } else if (key == "decay_biases") {
            cfg.decay_biases = parse_bool(key, value);
        } else if (key == "eta_theta_mode") {
            if (value == "1/d") {
                cfg.eta_theta = 0.0;
            } else {
                cfg.eta_theta = parse_double(key, value);
                if (cfg.eta_theta <= 0.0) {
                    throw std::invalid_argument("config key eta_theta_mode: must be 1/d or > 0");
                }
            }
        } else if (key == "theta_init") {
            cfg.theta_init = parse_double(key, value);
        } else if (key == "eval_every") {
            cfg.eval_every = parse_int(key, value);
        } else if (key == "precision") {
            if (value == "float64") cfg.precision = Precision::Float64;
            else if (value == "float32") cfg.precision = Precision::Float32;
            else throw std::invalid_argument("config key precision: unknown value '" + value + "'");
        } else if (key == "eps_prime_list") {
            cfg.eps_primes.clear();
            cfg.eps_tokens.clear();
            for (const std::string& part : split(value, ',')) {
                const std::string token = trim(part);
                cfg.eps_primes.push_back(parse_eps_token(token));
                cfg.eps_tokens.push_back(token);
            }
            if (cfg.eps_primes.empty()) {
                throw std::invalid_argument("config key eps_prime_list: empty list");
            }
        } else if (key == "seeds") {
            cfg.seeds = parse_u64_list(key, value);
            if (cfg.seeds.empty()) throw std::invalid_argument("config key seeds: empty list");
        } else if (key == "dataset") {
            if (value == "mnist") cfg.dataset = DatasetKind::Mnist;
            else if (value == "synthetic_images") cfg.dataset = DatasetKind::SyntheticImages;
            else if (value == "synthetic_subset") cfg.dataset = DatasetKind::SyntheticSubset;
            else throw std::invalid_argument("config key dataset: unknown value '" + value + "'");
        } else if (key == "train_images") {
            cfg.train_images = value;
        } else if (key == "train_labels") {
            cfg.train_labels = value;
        } else if (key == "test_images") {
            cfg.test_images = value;
        } else if (key == "test_labels") {
            cfg.test_labels = value;
        } else if (key == "train_limit") {
            cfg.train_limit = parse_int(key, value);
        } else if (key == "test_limit") {
            cfg.test_limit = parse_int(key, value);
        } else if (key == "side") {
            cfg.side = parse_int(key, value);
        } else if (key == "classes") {
            cfg.classes = parse_int(key, value);
        } else if (key == "train_n") {
            cfg.train_n = parse_int(key, value);
        } else if (key == "test_n") {
            cfg.test_n = parse_int(key, value);
        } else if (key == "d_relevant") {
            cfg.d_relevant = parse_int(key, value);
        } else if (key == "d_noise") {
            cfg.d_noise = parse_int(key, value);
        } else if (key == "margin") {
            cfg.margin = parse_double(key, value);
        } else if (key == "noise") {
            cfg.noise = parse_double(key, value);
        } else if (key == "data_seed") {
            cfg.data_seed = parse_u64(key, value);
        } else if (key == "bb_dim") {
            cfg.bb_dim = parse_int(key, value);
        } else if (key == "bb_relevant") {
            cfg.bb_relevant = parse_int(key, value);
        } else if (key == "bb_iterations") {
            cfg.bb_iterations = parse_ll(key, value);
        } else {
            throw std::invalid_argument("unknown config key: '" + key + "'");
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

std::filesystem::path resolve_data_path(const std::string& path) {
    if (path.empty()) return {};
    std::filesystem::path p(path);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv(kDataRootEnvVar)) {
        return std::filesystem::path(root) / p;
    }
    return p;
}

MaskedTopology topology_from_config(const ExperimentConfig& config) {
    switch (config.task) {
        case TaskKind::Unit:
            if (config.widths.size() < 3) {
                throw std::invalid_argument(
                    "unit task needs widths = input,hidden...,output (>= 3 entries)");
            }
            return MaskedTopology::unit_mlp(config.widths);
        case TaskKind::Connection:
            if (config.widths.size() != 3) {
                throw std::invalid_argument(
                    "connection task needs widths = input,growth,output (3 entries)");
            }
            if (config.block_layers < 1) {
                throw std::invalid_argument("connection task needs L_block >= 1");
            }
            return MaskedTopology::dense_block(config.widths[0], config.widths[1],
                                               config.block_layers, config.widths[2]);
        case TaskKind::BlackBox:
            break;
    }
    throw std::invalid_argument("blackbox task has no network topology");
}

namespace {

Dataset load_split(const ExperimentConfig& config, bool train) {
    const int limit = train ? config.train_limit : config.test_limit;
    Dataset data;
    switch (config.dataset) {
        case DatasetKind::Mnist: {
            std::string images = train ? config.train_images : config.test_images;
            std::string labels = train ? config.train_labels : config.test_labels;
            if (images.empty()) images = train ? "train-images-idx3-ubyte" : "t10k-images-idx3-ubyte";
            if (labels.empty()) labels = train ? "train-labels-idx1-ubyte" : "t10k-labels-idx1-ubyte";
            data = load_mnist_idx(resolve_data_path(images), resolve_data_path(labels));
            break;
        }
        case DatasetKind::SyntheticImages: {
            // both splits share the prototype stream, so they describe the
            // same task; only the sample noise differs between them
            Rng proto_rng = make_rng(config.data_seed, 12u);
            Rng jitter_rng = make_rng(config.data_seed, train ? 10u : 11u);
            data = synthetic_image_task(config.side, config.classes,
                                        train ? config.train_n : config.test_n, proto_rng,
                                        jitter_rng, config.noise);
            break;
        }
        case DatasetKind::SyntheticSubset: {
            Rng rng = make_rng(config.data_seed, train ? 10u : 11u);
            data = synthetic_subset_task(config.d_relevant, config.d_noise,
                                         train ? config.train_n : config.test_n, rng,
                                         config.margin);
            break;
        }
    }
    return limit > 0 ? data.take(limit) : data;
}

} // namespace

Dataset load_train_data(const ExperimentConfig& config) { return load_split(config, true); }
Dataset load_test_data(const ExperimentConfig& config) { return load_split(config, false); }

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_summary_csv: cannot open " + path.string());
    out << "eps_prime,seed,final_test_error,final_usage_rate,per_layer_counts\n";
    for (const SummaryRow& row : rows) {
        out << format_full(row.eps_prime) << ',' << row.seed << ','
            << format_full(row.final_test_error) << ',' << format_full(row.final_usage_rate)
            << ',';
        for (std::size_t i = 0; i < row.per_layer_counts.size(); ++i) {
            if (i > 0) out << ';';
            out << row.per_layer_counts[i];
        }
        out << '\n';
    }
}

std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("no runs found: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) ||
        trim(line) != "eps_prime,seed,final_test_error,final_usage_rate,per_layer_counts") {
        throw std::runtime_error("summary CSV header mismatch in " + path.string());
    }
    std::vector<SummaryRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split(trim(line), ',');
        if (fields.size() != 5) {
            throw std::runtime_error("summary CSV line " + std::to_string(line_no) +
                                     ": expected 5 fields");
        }
        SummaryRow row;
        row.eps_prime = parse_double("eps_prime", fields[0]);
        row.seed = parse_u64("seed", fields[1]);
        row.final_test_error = parse_double("final_test_error", fields[2]);
        row.final_usage_rate = parse_double("final_usage_rate", fields[3]);
        if (!fields[4].empty()) {
            for (const std::string& part : split(fields[4], ';')) {
                row.per_layer_counts.push_back(parse_int("per_layer_counts", part));
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

TrainConfig train_config_for(const ExperimentConfig& config, double eps_prime,
                             std::uint64_t seed) {
    TrainConfig tc;
    tc.lambda = config.lambda;
    tc.theta_lr = config.eta_theta;
    tc.eps_prime = eps_prime;
    tc.theta_init = config.theta_init;
    tc.batch_size = config.batch;
    tc.epochs = config.epochs;
    tc.lr0 = config.lr0;
    tc.momentum = config.momentum;
    tc.weight_decay = config.weight_decay;
    tc.decay_biases = config.decay_biases;
    tc.seed_mask = seed;
    tc.seed_init = seed;
    tc.seed_shuffle = seed;
    tc.eval_every = config.eval_every;
    return tc;
}

template <class S>
SummaryRow run_entry(const ExperimentConfig& config, const MaskedTopology& topology,
                     const Dataset& train_data, const Dataset& test_data, double eps_prime,
                     const std::string& eps_token, std::uint64_t seed,
                     const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const TrainConfig tc = train_config_for(config, eps_prime, seed);
    const TrainResult<S> result = train<S>(tc, train_data, topology, &test_data);

    write_history_csv(result.history, dir / "history.csv");
    write_epoch_error_csv(result.history, dir / "epochs.csv");
    save_theta(result.theta, dir / "theta.txt");
    save_weights(result.weights, topology, dir / "weights.bin");
    if (result.diverged) {
        std::ofstream note(dir / "diverged.txt");
        note << result.diverged_reason << '\n';
    }

    const StructureMask det = deterministic_mask(result.theta);
    SummaryRow row;
    row.eps_prime = eps_prime;
    row.eps_token = eps_token;
    row.seed = seed;
    row.final_test_error = evaluate(result.weights, topology, det, test_data);
    row.final_usage_rate = weight_usage_rate(topology, det);
    row.per_layer_counts = topology.selected_counts(det);
    return row;
}

SummaryRow run_entry_dispatch(const ExperimentConfig& config, const MaskedTopology& topology,
                              const Dataset& train_data, const Dataset& test_data,
                              double eps_prime, const std::string& eps_token,
                              std::uint64_t seed, const std::filesystem::path& dir) {
    if (config.precision == Precision::Float32) {
        return run_entry<float>(config, topology, train_data, test_data, eps_prime, eps_token,
                                seed, dir);
    }
    return run_entry<double>(config, topology, train_data, test_data, eps_prime, eps_token,
                             seed, dir);
}

void require_runnable(const ExperimentConfig& config) {
    if (config.eps_primes.empty()) throw std::invalid_argument("config error: empty eps_prime list");
    if (config.seeds.empty()) throw std::invalid_argument("config error: empty seeds list");
}

} // namespace

int run_single(const ExperimentConfig& config, const std::filesystem::path& out_dir,
               std::optional<std::uint64_t> seed_override) {
    require_runnable(config);
    const MaskedTopology topology = topology_from_config(config);
    const Dataset train_data = load_train_data(config);
    const Dataset test_data = load_test_data(config);
    const std::uint64_t seed = seed_override.value_or(config.seeds.front());
    std::filesystem::create_directories(out_dir);
    const SummaryRow row =
        run_entry_dispatch(config, topology, train_data, test_data, config.eps_primes.front(),
                           config.eps_tokens.front(), seed, out_dir);
    write_summary_csv({row}, out_dir / "summary.csv");
    std::cout << "eps_prime=" << row.eps_prime << " seed=" << row.seed
              << " test_error=" << row.final_test_error
              << " usage_rate=" << row.final_usage_rate << " counts=";
    for (std::size_t i = 0; i < row.per_layer_counts.size(); ++i) {
        if (i > 0) std::cout << ';';
        std::cout << row.per_layer_counts[i];
    }
    std::cout << std::endl;
    return std::filesystem::exists(out_dir / "diverged.txt") ? 1 : 0;
}

int run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir, int jobs,
              std::optional<std::uint64_t> seed_override) {
    ExperimentConfig cfg = config;
    if (seed_override) cfg.seeds = {*seed_override};
    require_runnable(cfg);
    const MaskedTopology topology = topology_from_config(cfg);
    const Dataset train_data = load_train_data(cfg);
    const Dataset test_data = load_test_data(cfg);
    std::filesystem::create_directories(out_dir);

    const int n_eps = static_cast<int>(cfg.eps_primes.size());
    const int n_seeds = static_cast<int>(cfg.seeds.size());
    const int total = n_eps * n_seeds;
    std::vector<SummaryRow> rows(static_cast<std::size_t>(total));
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::string first_error;

    auto worker = [&] {
        while (true) {
            const int idx = next.fetch_add(1);
            if (idx >= total) return;
            const int e = idx / n_seeds;
            const int s = idx % n_seeds;
            const std::filesystem::path dir = out_dir / ("eps_" + cfg.eps_tokens[static_cast<std::size_t>(e)]) /
                                              ("seed_" + std::to_string(cfg.seeds[static_cast<std::size_t>(s)]));
            try {
                rows[static_cast<std::size_t>(idx)] = run_entry_dispatch(
                    cfg, topology, train_data, test_data,
                    cfg.eps_primes[static_cast<std::size_t>(e)],
                    cfg.eps_tokens[static_cast<std::size_t>(e)],
                    cfg.seeds[static_cast<std::size_t>(s)], dir);
            } catch (const std::exception& ex) {
                const std::scoped_lock lock(error_mutex);
                if (first_error.empty()) first_error = ex.what();
            }
        }
    };

    const int n_threads = std::clamp(jobs, 1, total);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (!first_error.empty()) throw std::runtime_error(first_error);

    write_summary_csv(rows, out_dir / "summary.csv");
    return summarize_outputs(out_dir);
}

int run_bench(const ExperimentConfig& config, const std::filesystem::path& out_dir,
              std::optional<std::uint64_t> seed_override) {
    ExperimentConfig cfg = config;
    if (seed_override) cfg.seeds = {*seed_override};
    require_runnable(cfg);
    if (cfg.task != TaskKind::BlackBox) {
        throw std::invalid_argument("bench needs task = blackbox");
    }
    if (cfg.bb_relevant < 0 || cfg.bb_relevant > cfg.bb_dim) {
        throw std::invalid_argument("bb_relevant must lie in [0, bb_dim]");
    }
    std::filesystem::create_directories(out_dir);

    std::vector<int> relevant(static_cast<std::size_t>(cfg.bb_relevant));
    for (int i = 0; i < cfg.bb_relevant; ++i) relevant[static_cast<std::size_t>(i)] = i;
    const ComplexityCoefficients c = unit_selection_coeffs(cfg.bb_dim);

    std::ofstream summary(out_dir / "bench_summary.csv");
    if (!summary) throw std::runtime_error("cannot open bench summary in " + out_dir.string());
    summary << "eps_prime,seed,final_loss,ones_count\n";

    for (std::size_t e = 0; e < cfg.eps_primes.size(); ++e) {
        for (std::uint64_t seed : cfg.seeds) {
            BlackBoxConfig bb;
            bb.dim = cfg.bb_dim;
            bb.lambda = cfg.lambda;
            bb.theta_lr = cfg.eta_theta;
            bb.theta_init = cfg.theta_init;
            bb.iterations = cfg.bb_iterations;
            bb.seed = seed;
            bb.record_trajectory = true;
            const BlackBoxResult result = run_black_box(
                bb, [&](const StructureMask& m) { return subset_count_loss(m, relevant); }, c,
                cfg.eps_primes[e]);

            const std::filesystem::path dir =
                out_dir / ("eps_" + cfg.eps_tokens[e]) / ("seed_" + std::to_string(seed));
            std::filesystem::create_directories(dir);
            write_trajectory_csv(result, dir / "trajectory.csv");
            save_theta(result.theta, dir / "theta.txt");

            const StructureMask det = deterministic_mask(result.theta);
            summary << format_full(cfg.eps_primes[e]) << ',' << seed << ','
                    << format_full(subset_count_loss(det, relevant)) << ',' << det.count_ones()
                    << '\n';
        }
    }
    return 0;
}

int summarize_outputs(const std::filesystem::path& out_dir) {
    const std::vector<SummaryRow> rows = read_summary_csv(out_dir / "summary.csv");
    if (rows.empty()) throw std::runtime_error("no runs found in " + out_dir.string());

    std::map<double, std::vector<const SummaryRow*>, std::greater<>> groups;
    for (const SummaryRow& row : rows) groups[row.eps_prime].push_back(&row);

    std::ofstream tradeoff(out_dir / "tradeoff.csv");
    if (!tradeoff) throw std::runtime_error("cannot open tradeoff.csv in " + out_dir.string());
    tradeoff << "eps_prime,runs,median_test_error,q25_test_error,q75_test_error,"
                "median_usage_rate,q25_usage_rate,q75_usage_rate\n";

    std::ofstream table(out_dir / "per_layer_table.txt");
    if (!table) throw std::runtime_error("cannot open per_layer_table.txt in " + out_dir.string());
    table.precision(17);

    for (const auto& [eps, members] : groups) {
        std::vector<double> errors, usages;
        errors.reserve(members.size());
        usages.reserve(members.size());
        const std::size_t n_groups = members.front()->per_layer_counts.size();
        for (const SummaryRow* row : members) {
            errors.push_back(row->final_test_error);
            usages.push_back(row->final_usage_rate);
            if (row->per_layer_counts.size() != n_groups) {
                throw std::runtime_error("summary rows disagree on layer count");
            }
        }
        std::sort(errors.begin(), errors.end());
        std::sort(usages.begin(), usages.end());
        tradeoff << format_full(eps) << ',' << members.size() << ','
                 << format_full(quantile_sorted(errors, 0.5)) << ','
                 << format_full(quantile_sorted(errors, 0.25)) << ','
                 << format_full(quantile_sorted(errors, 0.75)) << ','
                 << format_full(quantile_sorted(usages, 0.5)) << ','
                 << format_full(quantile_sorted(usages, 0.25)) << ','
                 << format_full(quantile_sorted(usages, 0.75)) << '\n';

        table << "eps_prime=" << eps << " median_counts=";
        for (std::size_t g = 0; g < n_groups; ++g) {
            std::vector<double> counts;
            counts.reserve(members.size());
            for (const SummaryRow* row : members) {
                counts.push_back(static_cast<double>(row->per_layer_counts[g]));
            }
            std::sort(counts.begin(), counts.end());
            if (g > 0) table << ';';
            table << quantile_sorted(counts, 0.5);
        }
        table << '\n';
    }
    return 0;
}

} // namespace dso
