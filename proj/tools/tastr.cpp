#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tastr/config.hpp"
#include "tastr/dataset_io.hpp"
#include "tastr/errors.hpp"
#include "tastr/evaluation.hpp"
#include "tastr/log.hpp"
#include "tastr/pipeline.hpp"
#include "tastr/simulator.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace tastr;

constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 1 missing input, 2 invalid config, 3 incompatible
// inputs, 4 internal stage failure.
enum ExitCode : int {
    kOk = 0,
    kMissingInput = 1,
    kInvalidConfig = 2,
    kIncompatible = 3,
    kStageFailure = 4,
};

struct MissingInput : std::runtime_error {
    explicit MissingInput(const fs::path& p)
        : std::runtime_error("missing input: " + p.string()) {}
};

void require_file(const fs::path& p) {
    if (!fs::exists(p)) throw MissingInput(p);
}

struct Options {
    std::string config_path;
    long long seed = -1;  // < 0: keep the config's seed
    int iterations = -1;  // < 0: keep the config's n_iterations
    std::string ablation = "none";
    bool weak = false;
    int threads = 0;  // 0: keep the config's thread count
    int iteration = 1;  // associate: which round's feature stream to use
    std::string data_dir;
    std::string out;
    std::string checkpoint;
};

// Resolution order: explicit --config, else a config.toml stored next to
// the checkpoint (so run directories re-evaluate with their own settings),
// else defaults.
Config resolve_config(const Options& opt) {
    if (!opt.config_path.empty()) {
        require_file(opt.config_path);
        return load_config(opt.config_path);
    }
    if (!opt.checkpoint.empty()) {
        const fs::path beside = fs::path(opt.checkpoint).parent_path() / "config.toml";
        if (fs::exists(beside)) return load_config(beside);
    }
    return default_config();
}

void apply_overrides(Config& cfg, const Options& opt) {
    if (opt.seed >= 0) {
        cfg.sim.seed = static_cast<std::uint64_t>(opt.seed);
        cfg.pipeline.seed = static_cast<std::uint64_t>(opt.seed);
    }
    if (opt.iterations >= 0) cfg.pipeline.n_iterations = opt.iterations;
    if (opt.threads > 0) cfg.pipeline.threads = opt.threads;
    if (opt.weak) cfg.pipeline.weakly_supervised = true;
    if (opt.ablation == "no-str") {
        cfg.pipeline.assoc.use_str = false;
    } else if (opt.ablation == "no-kmeans") {
        cfg.pipeline.assoc.use_kmeans = false;
    } else if (opt.ablation == "no-progressive") {
        cfg.pipeline.progressive = false;
    }
    cfg.validate();
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_manifest(const fs::path& dir, const std::string& command, const Config& cfg,
                    const std::vector<std::string>& streams,
                    const std::vector<std::pair<std::string, std::string>>& outputs,
                    std::optional<double> seconds) {
    ordered_json m;
    m["tool"] = "tastr";
    m["version"] = kVersion;
    m["command"] = command;
    m["config_hash"] = hex64(config_hash(cfg));
    m["root_seed"] = cfg.pipeline.seed;
    m["simulator_seed"] = cfg.sim.seed;
    m["rng_streams"] = streams;
    ordered_json outs = ordered_json::object();
    for (const auto& [key, value] : outputs) outs[key] = value;
    m["outputs"] = outs;
    m["timing"]["total_seconds"] = seconds ? ordered_json(*seconds) : ordered_json(nullptr);
    std::ofstream f(dir / "manifest.json");
    if (!f) throw Error("cannot open " + (dir / "manifest.json").string() + " for writing");
    f << m.dump(2) << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f << text;
    if (!f.good()) throw Error("failed writing " + path.string());
}

int cmd_simulate(const Options& opt) {
    Config cfg = resolve_config(opt);
    apply_overrides(cfg, opt);
    const fs::path out_dir(opt.out);
    fs::create_directories(out_dir);

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::string> streams = {"simulator"};
    const std::vector<std::pair<std::string, std::string>> outputs = {
        {"tracklets", "tracklets.jsonl"},
        {"topology", "topology.json"},
        {"truth", "truth.json"},
        {"config", "config.toml"},
    };
    write_manifest(out_dir, "simulate", cfg, streams, outputs, std::nullopt);
    write_text(out_dir / "config.toml", emit_config(cfg));

    const auto [dataset, truth] = generate(cfg.sim);
    save_dataset(dataset, out_dir / "tracklets.jsonl");
    save_topology(cfg.sim.topology, out_dir / "topology.json");
    save_ground_truth(truth, out_dir / "truth.json");

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(out_dir, "simulate", cfg, streams, outputs, seconds);
    std::cout << "simulated " << dataset.size() << " tracklets over "
              << dataset.cameras.size() << " cameras into " << out_dir.string() << "\n";
    return kOk;
}

int cmd_run(const Options& opt) {
    Config cfg = resolve_config(opt);
    apply_overrides(cfg, opt);
    const fs::path data_dir(opt.data_dir);
    require_file(data_dir / "tracklets.jsonl");
    require_file(data_dir / "topology.json");
    const fs::path out_dir(opt.out);
    fs::create_directories(out_dir);

    const TrackletDataset dataset = load_dataset(data_dir / "tracklets.jsonl");
    const CameraTopology topology = load_topology(data_dir / "topology.json");
    std::optional<GroundTruth> truth;
    if (fs::exists(data_dir / "truth.json")) {
        truth = load_ground_truth(data_dir / "truth.json");
    }

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::string> streams = {"model-init", "train-s1", "associate/<i>",
                                              "train-cross/<i>", "assoc-feature/<tracklet>",
                                              "eval-feature/<tracklet>"};
    const std::vector<std::pair<std::string, std::string>> outputs = {
        {"config", "config.toml"},
        {"metrics", "metrics.json"},
        {"cmc", "cmc.csv"},
        {"checkpoints", "model_iter<N>.ckpt"},
        {"matches", "matches_iter<N>.csv"},
    };
    write_manifest(out_dir, "run", cfg, streams, outputs, std::nullopt);
    write_text(out_dir / "config.toml", emit_config(cfg));

    const ProgressiveResult result = run_progressive(
        dataset, topology, cfg.pipeline, truth ? &*truth : nullptr, out_dir);

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(out_dir, "run", cfg, streams, outputs, seconds);

    const IterationRecord& last = result.records.back();
    std::cout << "run finished: " << result.records.size() << " stage records";
    if (last.has_metrics) {
        std::cout << ", final rank-1 " << last.metrics.cmc_at(1) << ", mAP "
                  << last.metrics.map;
    }
    std::cout << "\n";
    return kOk;
}

int cmd_eval(const Options& opt) {
    Config cfg = resolve_config(opt);
    apply_overrides(cfg, opt);
    require_file(opt.checkpoint);
    const fs::path data_dir(opt.data_dir);
    require_file(data_dir / "tracklets.jsonl");

    const EmbeddingModel model = load_checkpoint(opt.checkpoint);
    const TrackletDataset dataset = load_dataset(data_dir / "tracklets.jsonl");
    const MetricsReport metrics = evaluate_retrieval(
        dataset, model, cfg.pipeline.sampler.max_images, cfg.pipeline.threads);

    ordered_json j;
    j["cmc1"] = metrics.cmc_at(1);
    j["cmc5"] = metrics.cmc_at(5);
    j["cmc10"] = metrics.cmc_at(10);
    j["cmc20"] = metrics.cmc_at(20);
    j["map"] = metrics.map;
    j["num_queries"] = metrics.num_queries;
    j["num_gallery"] = metrics.num_gallery;
    if (opt.out.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        write_text(opt.out, j.dump(2) + "\n");
        std::cout << "rank-1 " << metrics.cmc_at(1) << ", mAP " << metrics.map
                  << " -> " << opt.out << "\n";
    }
    return kOk;
}

int cmd_associate(const Options& opt) {
    Config cfg = resolve_config(opt);
    apply_overrides(cfg, opt);
    require_file(opt.checkpoint);
    const fs::path data_dir(opt.data_dir);
    require_file(data_dir / "tracklets.jsonl");
    require_file(data_dir / "topology.json");

    const EmbeddingModel model = load_checkpoint(opt.checkpoint);
    const TrackletDataset dataset = load_dataset(data_dir / "tracklets.jsonl");
    const CameraTopology topology = load_topology(data_dir / "topology.json");

    AssociationParams params = cfg.pipeline.assoc;
    params.max_images = cfg.pipeline.sampler.max_images;
    params.threads = cfg.pipeline.threads;
    // Same stream as pipeline round `iteration`, so associating the
    // checkpoint of round i-1 reproduces matches_iter<i>.csv.
    params.feature_seed =
        Rng::stream(cfg.pipeline.seed, "associate", static_cast<std::uint64_t>(opt.iteration))
            .next_u64();

    const MatchSet matches = associate_all(dataset, model, topology, params);
    save_matches_csv(matches, opt.out);
    std::cout << "associated: " << matches.candidate_count() << " candidates, "
              << matches.accepted_count() << " accepted -> " << opt.out << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    if (!log::env_has_level()) log::threshold() = log::Level::Info;

    CLI::App app{"Progressive unsupervised person re-identification over tracklets"};
    app.set_version_flag("--version", std::string("tastr ") + kVersion);
    Options opt;
    bool print_config = false;
    app.add_flag("--print-config", print_config,
                 "Print the resolved configuration as TOML and exit");
    app.add_option("--config", opt.config_path, "Configuration file (TOML)");

    const auto add_common = [&](CLI::App* sub, bool with_seed) {
        sub->add_option("--config", opt.config_path, "Configuration file (TOML)");
        if (with_seed) {
            sub->add_option("--seed", opt.seed, "Root RNG seed override")
                ->check(CLI::NonNegativeNumber);
        }
        sub->add_option("--threads", opt.threads, "Worker thread cap")
            ->check(CLI::PositiveNumber);
    };

    CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic camera-network world");
    add_common(sim, true);
    sim->add_option("--out", opt.out, "Output directory")->required();

    CLI::App* run = app.add_subcommand("run", "Train the full progressive pipeline");
    add_common(run, true);
    run->add_option("--data", opt.data_dir, "Directory with tracklets.jsonl + topology.json")
        ->required();
    run->add_option("--out", opt.out, "Run directory")->required();
    run->add_option("--iterations", opt.iterations, "Association/training rounds")
        ->check(CLI::NonNegativeNumber);
    run->add_option("--ablation", opt.ablation, "Component ablation")
        ->check(CLI::IsMember({"no-str", "no-kmeans", "no-progressive", "none"}));
    run->add_flag("--weak", opt.weak, "Weakly supervised mode (per-camera identities)");

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    add_common(eval, false);
    eval->add_option("--checkpoint", opt.checkpoint, "Model checkpoint")->required();
    eval->add_option("--data", opt.data_dir, "Directory with tracklets.jsonl")->required();
    eval->add_option("--out", opt.out, "Metrics JSON path (stdout when omitted)");

    CLI::App* assoc = app.add_subcommand("associate", "One-shot association on a checkpoint");
    add_common(assoc, true);
    assoc->add_option("--checkpoint", opt.checkpoint, "Model checkpoint")->required();
    assoc->add_option("--data", opt.data_dir, "Directory with tracklets.jsonl + topology.json")
        ->required();
    assoc->add_option("--out", opt.out, "Matches CSV path")->required();
    assoc->add_option("--iteration", opt.iteration, "Feature stream round index")
        ->check(CLI::PositiveNumber);
    assoc->add_option("--ablation", opt.ablation, "Component ablation")
        ->check(CLI::IsMember({"no-str", "no-kmeans", "no-progressive", "none"}));

    app.require_subcommand(0, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInvalidConfig;
    }

    try {
        if (print_config) {
            Config cfg = resolve_config(opt);
            apply_overrides(cfg, opt);
            std::cout << emit_config(cfg);
            return kOk;
        }
        if (sim->parsed()) return cmd_simulate(opt);
        if (run->parsed()) return cmd_run(opt);
        if (eval->parsed()) return cmd_eval(opt);
        if (assoc->parsed()) return cmd_associate(opt);
        std::cerr << app.help();
        return kInvalidConfig;
    } catch (const MissingInput& e) {
        log::error("%s", e.what());
        return kMissingInput;
    } catch (const ConfigError& e) {
        log::error("%s", e.what());
        return kInvalidConfig;
    } catch (const DimensionError& e) {
        log::error("%s", e.what());
        return kIncompatible;
    } catch (const Error& e) {
        log::error("%s", e.what());
        return kStageFailure;
    } catch (const std::exception& e) {
        log::error("unexpected failure: %s", e.what());
        return kStageFailure;
    }
}
