#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tastr/dataset_io.hpp"
#include "tastr/evaluation.hpp"
#include "tastr/rng.hpp"
#include "tastr/simulator.hpp"

using namespace tastr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string binary() {
    const char* env = std::getenv("TASTR_BIN");
    REQUIRE_MESSAGE(env != nullptr, "TASTR_BIN must point at the cli binary");
    return env;
}

struct CmdResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

CmdResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    const fs::path out_f = fs::temp_directory_path() / "tastr_cli_stdout";
    const fs::path err_f = fs::temp_directory_path() / "tastr_cli_stderr";
    const std::string cmd = env_prefix + binary() + " " + args + " >" + out_f.string() + " 2>" +
                            err_f.string();
    const int status = std::system(cmd.c_str());
    CmdResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_f);
    r.err = slurp(err_f);
    return r;
}

fs::path temp_root(const std::string& tag) {
    auto dir = fs::temp_directory_path() / ("tastr_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const char* kSmallConfig = R"(
[simulator]
num_identities = 30
num_cameras = 2
d_raw = 16
seed = 5

[sampler]
P = 3
K = 3
time_gap_T = 60.0

[model]
d_emb = 16

[pipeline]
steps_s1 = 200
steps_cross = 150
n_iterations = 2

[run]
seed = 5
)";

fs::path write_small_config(const fs::path& root) {
    const fs::path p = root / "small.toml";
    std::ofstream(p) << kSmallConfig;
    return p;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("simulate writes a self-describing world deterministically") {
    const auto root = temp_root("sim");
    const auto cfg = write_small_config(root);

    const CmdResult r = run_cli("simulate --config " + q(cfg) + " --out " + q(root / "a"));
    CHECK(r.code == 0);
    CHECK(r.out.find("simulated") != std::string::npos);
    for (const char* name :
         {"tracklets.jsonl", "topology.json", "truth.json", "config.toml", "manifest.json"}) {
        CHECK_MESSAGE(fs::exists(root / "a" / name), name);
    }

    const json manifest = json::parse(slurp(root / "a" / "manifest.json"));
    CHECK(manifest["command"] == "simulate");
    CHECK(manifest["config_hash"].get<std::string>().rfind("0x", 0) == 0);
    CHECK(manifest["timing"]["total_seconds"].is_number());
    CHECK(manifest["outputs"].contains("tracklets"));

    run_cli("simulate --config " + q(cfg) + " --seed 7 --out " + q(root / "b"));
    run_cli("simulate --config " + q(cfg) + " --seed 7 --out " + q(root / "c"));
    CHECK(slurp(root / "b" / "tracklets.jsonl") == slurp(root / "c" / "tracklets.jsonl"));
    CHECK(slurp(root / "b" / "truth.json") == slurp(root / "c" / "truth.json"));
    CHECK(slurp(root / "a" / "tracklets.jsonl") != slurp(root / "b" / "tracklets.jsonl"));

    const TrackletDataset ds = load_dataset(root / "a" / "tracklets.jsonl");
    CHECK(ds.labeled);
    CHECK(ds.cameras.size() == 2);
    fs::remove_all(root);
}

TEST_CASE("invalid configuration exits 2 naming the problem") {
    const auto root = temp_root("badcfg");

    std::ofstream(root / "frag.toml") << "[simulator]\nfragmentation_prob = 1.5\n";
    CmdResult r =
        run_cli("simulate --config " + q(root / "frag.toml") + " --out " + q(root / "x"));
    CHECK(r.code == 2);
    CHECK(r.err.find("fragmentation_prob") != std::string::npos);

    std::ofstream(root / "unknown.toml") << "[simulator]\nnum_vampires = 3\n";
    r = run_cli("simulate --config " + q(root / "unknown.toml") + " --out " + q(root / "x"));
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown key") != std::string::npos);

    r = run_cli("run --data " + q(root) + " --out " + q(root / "x") + " --ablation bogus");
    CHECK(r.code == 2);

    r = run_cli("simulate --seed -3 --out " + q(root / "x"));
    CHECK(r.code == 2);
    fs::remove_all(root);
}

TEST_CASE("run produces the full artifact set and is reproducible") {
    const auto root = temp_root("run");
    const auto cfg = write_small_config(root);
    REQUIRE(run_cli("simulate --config " + q(cfg) + " --out " + q(root / "data")).code == 0);

    const CmdResult r = run_cli("run --config " + q(cfg) + " --data " + q(root / "data") +
                                " --out " + q(root / "runA"));
    CHECK(r.code == 0);
    CHECK(r.out.find("final rank-1") != std::string::npos);
    for (const char* name :
         {"model_iter0.ckpt", "model_iter1.ckpt", "model_iter2.ckpt", "matches_iter1.csv",
          "matches_iter2.csv", "cmc_iter0.csv", "cmc_iter2.csv", "metrics.json", "cmc.csv",
          "config.toml", "manifest.json"}) {
        CHECK_MESSAGE(fs::exists(root / "runA" / name), name);
    }

    const json metrics = json::parse(slurp(root / "runA" / "metrics.json"));
    REQUIRE(metrics.is_array());
    REQUIRE(metrics.size() == 3);
    CHECK(metrics[0]["iteration"] == 0);
    CHECK(metrics[0]["assoc_precision"].is_null());
    CHECK(metrics[0]["accepted_matches"] == 0);
    CHECK(metrics[1]["assoc_precision"].is_number());
    CHECK(metrics[2]["cmc1"].is_number());
    CHECK(metrics[2]["checkpoint"] == "model_iter2.ckpt");
    CHECK(metrics[2]["match_counts"].is_object());

    run_cli("run --config " + q(cfg) + " --data " + q(root / "data") + " --out " +
            q(root / "runB"));
    CHECK(slurp(root / "runA" / "metrics.json") == slurp(root / "runB" / "metrics.json"));
    CHECK(slurp(root / "runA" / "model_iter2.ckpt") == slurp(root / "runB" / "model_iter2.ckpt"));
    CHECK(slurp(root / "runA" / "cmc.csv") == slurp(root / "runB" / "cmc.csv"));

    SUBCASE("iteration and ablation flags reshape the schedule") {
        run_cli("run --config " + q(cfg) + " --data " + q(root / "data") + " --out " +
                q(root / "runS1") + " --iterations 0");
        const json s1 = json::parse(slurp(root / "runS1" / "metrics.json"));
        CHECK(s1.size() == 1);

        run_cli("run --config " + q(cfg) + " --data " + q(root / "data") + " --out " +
                q(root / "runNP") + " --ablation no-progressive");
        const json np = json::parse(slurp(root / "runNP" / "metrics.json"));
        CHECK(np.size() == 2);

        run_cli("run --config " + q(cfg) + " --data " + q(root / "data") + " --out " +
                q(root / "runNS") + " --ablation no-str");
        const std::string emitted = slurp(root / "runNS" / "config.toml");
        CHECK(emitted.find("use_str = false") != std::string::npos);
        CHECK(slurp(root / "runNS" / "metrics.json") != slurp(root / "runA" / "metrics.json"));
    }
    SUBCASE("weak supervision runs on labeled data") {
        const CmdResult w = run_cli("run --config " + q(cfg) + " --data " + q(root / "data") +
                                    " --out " + q(root / "runW") + " --weak");
        CHECK(w.code == 0);
        CHECK(json::parse(slurp(root / "runW" / "metrics.json")).size() == 3);
    }
    SUBCASE("missing data directory exits 1") {
        const CmdResult m = run_cli("run --config " + q(cfg) + " --data " + q(root / "nope") +
                                    " --out " + q(root / "x"));
        CHECK(m.code == 1);
    }
    fs::remove_all(root);
}

TEST_CASE("eval reproduces stored pipeline metrics exactly") {
    const auto root = temp_root("eval");
    const auto cfg = write_small_config(root);
    REQUIRE(run_cli("simulate --config " + q(cfg) + " --out " + q(root / "data")).code == 0);
    REQUIRE(run_cli("run --config " + q(cfg) + " --data " + q(root / "data") + " --out " +
                    q(root / "run"))
                .code == 0);

    const json stored = json::parse(slurp(root / "run" / "metrics.json"));
    const CmdResult r = run_cli("eval --config " + q(cfg) + " --checkpoint " +
                                q(root / "run" / "model_iter2.ckpt") + " --data " +
                                q(root / "data"));
    CHECK(r.code == 0);
    const json fresh = json::parse(r.out);
    CHECK(fresh["cmc1"].get<double>() == stored[2]["cmc1"].get<double>());
    CHECK(fresh["cmc5"].get<double>() == stored[2]["cmc5"].get<double>());
    CHECK(fresh["map"].get<double>() == stored[2]["map"].get<double>());

    SUBCASE("the run directory's own config resolves implicitly") {
        const CmdResult impl = run_cli("eval --checkpoint " +
                                       q(root / "run" / "model_iter2.ckpt") + " --data " +
                                       q(root / "data"));
        CHECK(impl.code == 0);
        CHECK(json::parse(impl.out)["map"].get<double>() == stored[2]["map"].get<double>());
    }
    SUBCASE("eval writes a metrics file when asked") {
        const CmdResult f = run_cli("eval --config " + q(cfg) + " --checkpoint " +
                                    q(root / "run" / "model_iter2.ckpt") + " --data " +
                                    q(root / "data") + " --out " + q(root / "m.json"));
        CHECK(f.code == 0);
        CHECK(json::parse(slurp(root / "m.json"))["cmc1"].is_number());
    }
    SUBCASE("missing checkpoint exits 1") {
        const CmdResult m = run_cli("eval --checkpoint " + q(root / "run" / "nothing.ckpt") +
                                    " --data " + q(root / "data"));
        CHECK(m.code == 1);
        CHECK(m.err.find("missing input") != std::string::npos);
    }
    SUBCASE("dimension mismatch exits 3") {
        std::ofstream(root / "wide.toml") << "[simulator]\nd_raw = 8\nnum_identities = 10\n";
        REQUIRE(run_cli("simulate --config " + q(root / "wide.toml") + " --out " +
                        q(root / "data8"))
                    .code == 0);
        const CmdResult m = run_cli("eval --config " + q(cfg) + " --checkpoint " +
                                    q(root / "run" / "model_iter2.ckpt") + " --data " +
                                    q(root / "data8"));
        CHECK(m.code == 3);
    }
    fs::remove_all(root);
}

TEST_CASE("random-init checkpoints evaluate near chance on the default world") {
    const auto root = temp_root("chance");
    std::ofstream(root / "frozen.toml") << "[pipeline]\nsteps_s1 = 0\nn_iterations = 0\n";
    REQUIRE(run_cli("simulate --out " + q(root / "data")).code == 0);
    REQUIRE(run_cli("run --config " + q(root / "frozen.toml") + " --data " + q(root / "data") +
                    " --out " + q(root / "run"))
                .code == 0);

    const CmdResult r = run_cli("eval --config " + q(root / "frozen.toml") + " --checkpoint " +
                                q(root / "run" / "model_iter0.ckpt") + " --data " +
                                q(root / "data") + " --threads 4");
    REQUIRE(r.code == 0);
    const double untrained_map = json::parse(r.out)["map"].get<double>();

    const TrackletDataset ds = load_dataset(root / "data" / "tracklets.jsonl");
    const RetrievalProtocol proto = make_protocol(ds);
    Rng rng = Rng::stream(99, "chance-oracle");
    double chance_sum = 0.0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
        Eigen::MatrixXd dist(proto.num_queries(), proto.num_gallery());
        for (Eigen::Index i = 0; i < dist.rows(); ++i)
            for (Eigen::Index j = 0; j < dist.cols(); ++j) dist(i, j) = rng.uniform01();
        chance_sum += cmc_map(dist, proto).map;
    }
    const double chance_map = chance_sum / trials;

    CHECK(chance_map < 0.05);
    CHECK(untrained_map < 0.25);
    CHECK(untrained_map < chance_map + 0.25);
    fs::remove_all(root);
}

TEST_CASE("associate reproduces the pipeline's match files byte for byte") {
    const auto root = temp_root("assoc");
    const auto cfg = write_small_config(root);
    REQUIRE(run_cli("simulate --config " + q(cfg) + " --out " + q(root / "data")).code == 0);
    REQUIRE(run_cli("run --config " + q(cfg) + " --data " + q(root / "data") + " --out " +
                    q(root / "run"))
                .code == 0);

    CmdResult r = run_cli("associate --config " + q(cfg) + " --checkpoint " +
                          q(root / "run" / "model_iter0.ckpt") + " --data " + q(root / "data") +
                          " --iteration 1 --out " + q(root / "m1.csv"));
    CHECK(r.code == 0);
    CHECK(slurp(root / "m1.csv") == slurp(root / "run" / "matches_iter1.csv"));

    r = run_cli("associate --config " + q(cfg) + " --checkpoint " +
                q(root / "run" / "model_iter1.ckpt") + " --data " + q(root / "data") +
                " --iteration 2 --out " + q(root / "m2.csv"));
    CHECK(r.code == 0);
    CHECK(slurp(root / "m2.csv") == slurp(root / "run" / "matches_iter2.csv"));
    CHECK(slurp(root / "m1.csv") != slurp(root / "m2.csv"));
    fs::remove_all(root);
}

TEST_CASE("print-config emits every key and round-trips stably") {
    const auto root = temp_root("printcfg");
    const CmdResult r = run_cli("--print-config");
    REQUIRE(r.code == 0);
    for (const char* key :
         {"[simulator]", "num_identities", "num_cameras", "d_raw", "appearance_noise_std",
          "camera_distortion_std", "transfer_time_cv", "fragmentation_prob",
          "distractor_fraction", "frames_per_visit_min", "frames_per_visit_max", "speed_mps",
          "[sampler]", "P = ", "K = ", "time_gap_T", "max_images", "[model]", "arch", "d_emb",
          "hidden", "[adam]", "lr", "beta1", "beta2", "eps", "[association]", "lambda", "k = ",
          "use_str", "use_kmeans", "[str]", "squared_sigma", "[pipeline]", "margin", "steps_s1",
          "steps_cross", "n_iterations", "progressive", "weakly_supervised", "[run]", "seed",
          "threads"}) {
        CHECK_MESSAGE(r.out.find(key) != std::string::npos, key);
    }

    std::ofstream(root / "echo.toml") << r.out;
    const CmdResult again = run_cli("--print-config --config " + q(root / "echo.toml"));
    CHECK(again.code == 0);
    CHECK(again.out == r.out);
    fs::remove_all(root);
}

TEST_CASE("log level env var gates stderr chatter") {
    const auto root = temp_root("log");
    const auto cfg = write_small_config(root);
    REQUIRE(run_cli("simulate --config " + q(cfg) + " --out " + q(root / "data")).code == 0);

    const std::string base = "run --config " + q(cfg) + " --data " + q(root / "data");
    const CmdResult quiet =
        run_cli(base + " --out " + q(root / "q"), "TASTR_LOG=error ");
    CHECK(quiet.code == 0);
    CHECK(quiet.err.empty());

    const CmdResult info = run_cli(base + " --out " + q(root / "i"), "TASTR_LOG=info ");
    CHECK(info.code == 0);
    CHECK(info.err.find("association:") != std::string::npos);

    const CmdResult debug = run_cli(base + " --out " + q(root / "d"), "TASTR_LOG=debug ");
    CHECK(debug.code == 0);
    CHECK(debug.err.find("batch loss") != std::string::npos);
    CHECK(debug.err.size() > info.err.size());
    fs::remove_all(root);
}

TEST_CASE("stage failures exit 4 and keep the partial run directory") {
    const auto root = temp_root("fail");
    std::ofstream(root / "infeasible.toml")
        << "[simulator]\nnum_identities = 10\nnum_cameras = 2\n[sampler]\ntime_gap_T = 1e9\n";
    REQUIRE(run_cli("simulate --config " + q(root / "infeasible.toml") + " --out " +
                    q(root / "data"))
                .code == 0);

    const CmdResult r = run_cli("run --config " + q(root / "infeasible.toml") + " --data " +
                                q(root / "data") + " --out " + q(root / "run"));
    CHECK(r.code == 4);
    CHECK_FALSE(r.err.empty());
    CHECK(fs::exists(root / "run" / "manifest.json"));
    CHECK(fs::exists(root / "run" / "config.toml"));
    fs::remove_all(root);
}
