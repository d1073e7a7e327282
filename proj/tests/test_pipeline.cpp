#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "tastr/pipeline.hpp"

using namespace tastr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    auto dir =
        fs::temp_directory_path() / ("tastr_pipe_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

SimConfig small_world(std::uint64_t seed) {
    SimConfig sim;
    sim.num_identities = 40;
    sim.num_cameras = 2;
    sim.topology = default_topology(2);
    sim.d_raw = 16;
    sim.seed = seed;
    return sim;
}

PipelineConfig fast_config(std::uint64_t seed) {
    PipelineConfig cfg;
    cfg.sampler.P = 3;
    cfg.sampler.K = 3;
    cfg.sampler.time_gap_T = 60.0;
    cfg.model.d_emb = 16;
    cfg.steps_s1 = 200;
    cfg.steps_cross = 150;
    cfg.n_iterations = 2;
    cfg.seed = seed;
    return cfg;
}

bool same_weights(const EmbeddingModel& a, const EmbeddingModel& b) {
    return a.arch == b.arch && a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

MatchSet true_matchset(const GroundTruth& truth) {
    MatchSet ms;
    for (const auto& [pair, pairs] : truth.true_pairs) {
        auto& assoc = ms.pairs[pair];
        for (const auto& [i, j] : pairs) {
            CandidatePair c;
            c.a_tracklet = i;
            c.b_tracklet = j;
            assoc.candidates.push_back(c);
            assoc.accepted.push_back(1);
        }
    }
    return ms;
}

}  // namespace

TEST_CASE("zero within-camera steps return the initial model") {
    const auto [ds, truth] = generate(small_world(1));
    PipelineConfig cfg = fast_config(7);
    cfg.steps_s1 = 0;

    const EmbeddingModel got = train_within_camera(ds, cfg);

    Rng init = Rng::stream(cfg.seed, "model-init");
    const EmbeddingModel want =
        make_model(cfg.model.arch, ds.d_raw, cfg.model.d_emb, cfg.model.hidden, init);
    CHECK(same_weights(got, want));
}

TEST_CASE("within-camera training is deterministic in the seed") {
    const auto [ds, truth] = generate(small_world(2));
    PipelineConfig cfg = fast_config(11);
    cfg.steps_s1 = 60;

    const EmbeddingModel a = train_within_camera(ds, cfg);
    const EmbeddingModel b = train_within_camera(ds, cfg);
    CHECK(same_weights(a, b));

    cfg.seed = 12;
    const EmbeddingModel c = train_within_camera(ds, cfg);
    CHECK_FALSE(same_weights(a, c));
}

TEST_CASE("cross-camera training respects its step count and feasibility") {
    const auto [ds, truth] = generate(small_world(3));
    PipelineConfig cfg = fast_config(13);
    cfg.steps_s1 = 40;
    const EmbeddingModel base = train_within_camera(ds, cfg);
    const MatchSet full = true_matchset(truth);

    SUBCASE("zero steps change nothing") {
        cfg.steps_cross = 0;
        const EmbeddingModel out = train_cross_camera(base, ds, full, cfg);
        CHECK(same_weights(out, base));
    }
    SUBCASE("an empty match set changes nothing") {
        const EmbeddingModel out = train_cross_camera(base, ds, MatchSet{}, cfg);
        CHECK(same_weights(out, base));
    }
    SUBCASE("too few accepted matches change nothing") {
        MatchSet thin;
        auto& assoc = thin.pairs[{0, 1}];
        CandidatePair c;
        c.a_tracklet = truth.true_pairs.begin()->second.front().first;
        c.b_tracklet = truth.true_pairs.begin()->second.front().second;
        assoc.candidates.push_back(c);
        assoc.accepted.push_back(1);
        const EmbeddingModel out = train_cross_camera(base, ds, thin, cfg);
        CHECK(same_weights(out, base));
    }
    SUBCASE("feasible matches move the weights deterministically") {
        const EmbeddingModel out = train_cross_camera(base, ds, full, cfg);
        CHECK_FALSE(same_weights(out, base));
        const EmbeddingModel again = train_cross_camera(base, ds, full, cfg);
        CHECK(same_weights(out, again));
        const EmbeddingModel other_round = train_cross_camera(base, ds, full, cfg, 2);
        CHECK_FALSE(same_weights(out, other_round));
    }
}

TEST_CASE("correct matches sharpen cross-camera retrieval") {
    double s1_sum = 0.0;
    double tuned_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SimConfig sim = small_world(seed);
        sim.num_identities = 60;
        const auto [ds, truth] = generate(sim);

        PipelineConfig cfg = fast_config(seed);
        cfg.steps_s1 = 400;
        cfg.steps_cross = 400;
        const EmbeddingModel s1 = train_within_camera(strip_labels(ds), cfg);
        const EmbeddingModel tuned =
            train_cross_camera(s1, strip_labels(ds), true_matchset(truth), cfg);

        s1_sum += evaluate_retrieval(ds, s1, cfg.sampler.max_images).cmc_at(1);
        tuned_sum += evaluate_retrieval(ds, tuned, cfg.sampler.max_images).cmc_at(1);
    }
    CHECK(tuned_sum / 5.0 > s1_sum / 5.0);
}

TEST_CASE("s1 rematches fragments better than a random model") {
    double random_sum = 0.0;
    double s1_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto [ds, truth] = generate(small_world(seed));
        PipelineConfig cfg = fast_config(seed);
        cfg.steps_s1 = 300;

        Rng init = Rng::stream(cfg.seed, "model-init");
        const EmbeddingModel random_model =
            make_model(cfg.model.arch, ds.d_raw, cfg.model.d_emb, cfg.model.hidden, init);
        const EmbeddingModel s1 = train_within_camera(strip_labels(ds), cfg);

        random_sum += fragmentation_rematch_eval(ds, random_model, 60, seed).rank1;
        s1_sum += fragmentation_rematch_eval(ds, s1, 60, seed).rank1;
    }
    CHECK(s1_sum / 5.0 > random_sum / 5.0);
}

TEST_CASE("noise-free training rematches fragments perfectly") {
    SimConfig sim = small_world(4);
    sim.appearance_noise_std = 0.0;
    sim.camera_distortion_std = 0.0;
    sim.fragmentation_prob = 0.0;  // duplicate-content fragments would tie at rank 1
    sim.frames_per_visit_range = {6, 30};
    const auto [ds, truth] = generate(sim);

    PipelineConfig cfg = fast_config(17);
    cfg.steps_s1 = 200;
    const EmbeddingModel s1 = train_within_camera(strip_labels(ds), cfg);
    const RematchResult r = fragmentation_rematch_eval(ds, s1, 60, 3);
    CHECK(r.rank1 == 1.0);
}

TEST_CASE("progressive run shapes, determinism, and ablation switches") {
    const auto [ds, truth] = generate(small_world(5));
    const PipelineConfig cfg = fast_config(19);

    SUBCASE("zero iterations produce exactly the within-camera record") {
        PipelineConfig c0 = cfg;
        c0.n_iterations = 0;
        const ProgressiveResult r = run_progressive(ds, default_topology(2), c0, &truth);
        REQUIRE(r.records.size() == 1);
        CHECK(r.records[0].iteration == 0);
        CHECK(r.records[0].accepted_total == 0);
        CHECK(r.records[0].has_metrics);
        CHECK_FALSE(r.records[0].has_truth);
        CHECK(same_weights(r.model, train_within_camera(strip_labels(ds), c0)));
    }
    SUBCASE("non-progressive collapses to one association round") {
        PipelineConfig c1 = cfg;
        c1.progressive = false;
        c1.n_iterations = 5;
        const ProgressiveResult r = run_progressive(ds, default_topology(2), c1, &truth);
        REQUIRE(r.records.size() == 2);
        CHECK(r.records[1].iteration == 1);
        CHECK(r.records[1].has_truth);
        CHECK(r.records[1].assoc.precision >= 0.0);
    }
    SUBCASE("identical configs give identical records and weights") {
        const ProgressiveResult a = run_progressive(ds, default_topology(2), cfg, &truth);
        const ProgressiveResult b = run_progressive(ds, default_topology(2), cfg, &truth);
        CHECK(same_weights(a.model, b.model));
        REQUIRE(a.records.size() == b.records.size());
        for (std::size_t i = 0; i < a.records.size(); ++i) {
            CHECK(a.records[i].accepted_total == b.records[i].accepted_total);
            CHECK(a.records[i].metrics.map == b.records[i].metrics.map);
        }
    }
    SUBCASE("labels never leak into unsupervised training") {
        const ProgressiveResult labeled = run_progressive(ds, default_topology(2), cfg, &truth);
        const ProgressiveResult blind = run_progressive(strip_labels(ds), default_topology(2), cfg);
        CHECK(same_weights(labeled.model, blind.model));
        CHECK(labeled.records.back().has_metrics);
        CHECK_FALSE(blind.records.back().has_metrics);
    }
    SUBCASE("weak supervision demands labels") {
        PipelineConfig weak = cfg;
        weak.weakly_supervised = true;
        CHECK_THROWS_AS(run_progressive(strip_labels(ds), default_topology(2), weak), ConfigError);
    }
}

TEST_CASE("run directory layout and metrics nulls") {
    const auto [ds, truth] = generate(small_world(6));
    PipelineConfig cfg = fast_config(23);
    cfg.n_iterations = 1;

    SUBCASE("labeled run with truth fills every field") {
        const auto dir = temp_dir("labeled");
        const ProgressiveResult r = run_progressive(ds, default_topology(2), cfg, &truth, dir);
        REQUIRE(r.records.size() == 2);
        CHECK(fs::exists(dir / "model_iter0.ckpt"));
        CHECK(fs::exists(dir / "model_iter1.ckpt"));
        CHECK(fs::exists(dir / "matches_iter1.csv"));
        CHECK(fs::exists(dir / "cmc_iter0.csv"));
        CHECK(fs::exists(dir / "cmc_iter1.csv"));
        CHECK(fs::exists(dir / "metrics.json"));
        CHECK(fs::exists(dir / "cmc.csv"));
        CHECK(file_bytes(dir / "cmc.csv") == file_bytes(dir / "cmc_iter1.csv"));

        const std::string metrics = file_bytes(dir / "metrics.json");
        CHECK(metrics.find("\"iteration\": 0") != std::string::npos);
        CHECK(metrics.find("\"iteration\": 1") != std::string::npos);
        CHECK(metrics.find("\"checkpoint\": \"model_iter1.ckpt\"") != std::string::npos);
        CHECK(metrics.find("\"cmc1\": null") == std::string::npos);

        const EmbeddingModel reloaded = load_checkpoint(dir / "model_iter1.ckpt");
        CHECK(same_weights(reloaded, r.model));
        fs::remove_all(dir);
    }
    SUBCASE("unlabeled run without truth writes nulls and skips cmc files") {
        const auto dir = temp_dir("blind");
        const ProgressiveResult r =
            run_progressive(strip_labels(ds), default_topology(2), cfg, nullptr, dir);
        REQUIRE(r.records.size() == 2);
        CHECK(fs::exists(dir / "model_iter0.ckpt"));
        CHECK(fs::exists(dir / "matches_iter1.csv"));
        CHECK(fs::exists(dir / "metrics.json"));
        CHECK_FALSE(fs::exists(dir / "cmc.csv"));
        CHECK_FALSE(fs::exists(dir / "cmc_iter0.csv"));

        const std::string metrics = file_bytes(dir / "metrics.json");
        CHECK(metrics.find("\"cmc1\": null") != std::string::npos);
        CHECK(metrics.find("\"assoc_precision\": null") != std::string::npos);
        fs::remove_all(dir);
    }
    SUBCASE("rewritten metrics stay byte-identical across reruns") {
        const auto dir_a = temp_dir("rerun_a");
        const auto dir_b = temp_dir("rerun_b");
        run_progressive(ds, default_topology(2), cfg, &truth, dir_a);
        run_progressive(ds, default_topology(2), cfg, &truth, dir_b);
        CHECK(file_bytes(dir_a / "metrics.json") == file_bytes(dir_b / "metrics.json"));
        CHECK(file_bytes(dir_a / "model_iter1.ckpt") == file_bytes(dir_b / "model_iter1.ckpt"));
        CHECK(file_bytes(dir_a / "matches_iter1.csv") == file_bytes(dir_b / "matches_iter1.csv"));
        fs::remove_all(dir_a);
        fs::remove_all(dir_b);
    }
}

TEST_CASE("pipeline config validation names offending fields") {
    PipelineConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    SUBCASE("margin") {
        cfg.margin = -0.1;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("steps") {
        cfg.steps_s1 = -1;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("iterations") {
        cfg.n_iterations = -2;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("adam") {
        cfg.adam.beta1 = 1.0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("embedded sampler") {
        cfg.sampler.P = 0;
        CHECK_THROWS_WITH_AS(cfg.validate(), "sampler.P must be >= 2", ConfigError);
    }
}
