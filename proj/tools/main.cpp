#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dso/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{
        "Joint optimization of network weights and a Bernoulli distribution over binary "
        "structure masks, with a model-complexity penalty"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::int64_t seed = -1;
    int jobs = 1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value experiment config")->required();
        sub->add_option("--out", out_dir, "output directory (default: out)");
        sub->add_option("--seed", seed, "replace the config's seed list with this one seed");
        sub->add_option("--jobs", jobs, "maximum concurrent runs");
    };

    CLI::App* train_cmd = app.add_subcommand("train", "single training run");
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "train every eps x seed combination");
    CLI::App* bench_cmd =
        app.add_subcommand("bench", "network-free benchmark of the structure optimizer");
    CLI::App* summarize_cmd =
        app.add_subcommand("summarize", "aggregate a sweep directory into trade-off tables");
    add_common(train_cmd);
    add_common(sweep_cmd);
    add_common(bench_cmd);
    summarize_cmd->add_option("--out", out_dir, "sweep output directory to aggregate");

    CLI11_PARSE(app, argc, argv);

    try {
        const std::optional<std::uint64_t> seed_override =
            seed >= 0 ? std::optional<std::uint64_t>(static_cast<std::uint64_t>(seed))
                      : std::nullopt;
        if (train_cmd->parsed()) {
            return dso::run_single(dso::load_config(config_path), out_dir, seed_override);
        }
        if (sweep_cmd->parsed()) {
            return dso::run_sweep(dso::load_config(config_path), out_dir, jobs, seed_override);
        }
        if (bench_cmd->parsed()) {
            return dso::run_bench(dso::load_config(config_path), out_dir, seed_override);
        }
        if (summarize_cmd->parsed()) {
            return dso::summarize_outputs(out_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
