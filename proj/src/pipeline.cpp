#include "tastr/pipeline.hpp"

#include <fstream>
#include <utility>

#include <json.hpp>

#include "tastr/errors.hpp"
#include "tastr/log.hpp"

namespace tastr {

namespace {

using ordered_json = nlohmann::ordered_json;

double batch_loss(const EmbeddingModel& model, const TripletBatch& batch, double margin) {
    std::vector<Eigen::VectorXd> emb;
    emb.reserve(batch.items.size());
    for (const auto& x : batch.items) emb.push_back(embed(model, x));
    return batch_hard_triplet_loss(emb, batch.labels, margin).loss;
}

void log_step(const char* stage, int step, const EmbeddingModel& model,
              const TripletBatch& batch, double margin) {
    if (!log::enabled(log::Level::Debug) || step % 200 != 0) return;
    log::debug("%s step %d: batch loss %.6f", stage, step, batch_loss(model, batch, margin));
}

}  // namespace

void PipelineConfig::validate() const {
    sampler.validate();
    assoc.validate();
    if (model.d_emb < 1) throw ConfigError("model.d_emb must be >= 1");
    if (model.arch == Arch::Mlp && model.hidden < 1) {
        throw ConfigError("model.hidden must be >= 1");
    }
    if (!(margin >= 0.0)) throw ConfigError("pipeline.margin must be >= 0");
    if (steps_s1 < 0) throw ConfigError("pipeline.steps_s1 must be >= 0");
    if (steps_cross < 0) throw ConfigError("pipeline.steps_cross must be >= 0");
    if (n_iterations < 0) throw ConfigError("pipeline.n_iterations must be >= 0");
    if (threads < 1) throw ConfigError("pipeline.threads must be >= 1");
    if (!(adam.lr > 0.0)) throw ConfigError("adam.lr must be > 0");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("adam.beta1 must be in [0,1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("adam.beta2 must be in [0,1)");
    if (!(adam.eps > 0.0)) throw ConfigError("adam.eps must be > 0");
}

EmbeddingModel train_within_camera(const TrackletDataset& view, const PipelineConfig& cfg) {
    cfg.validate();
    Rng init_rng = Rng::stream(cfg.seed, "model-init");
    EmbeddingModel model =
        make_model(cfg.model.arch, view.d_raw, cfg.model.d_emb, cfg.model.hidden, init_rng);
    AdamState opt = AdamState::init(model, cfg.adam);
    Rng rng = Rng::stream(cfg.seed, "train-s1");
    for (int step = 0; step < cfg.steps_s1; ++step) {
        const TripletBatch batch =
            cfg.weakly_supervised ? sample_weak_within_camera_batch(view, cfg.sampler, rng)
                                  : sample_tcscc_batch(view, cfg.sampler, rng);
        log_step("within-camera", step, model, batch, cfg.margin);
        const Gradients grads = loss_gradient(model, batch, cfg.margin);
        adam_step(opt, model, grads);
    }
    return model;
}

EmbeddingModel train_cross_camera(EmbeddingModel model, const TrackletDataset& view,
                                  const MatchSet& matches, const PipelineConfig& cfg,
                                  int iteration) {
    cfg.validate();
    bool feasible = false;
    for (const auto& [pair, assoc] : matches.pairs) {
        if (assoc.accepted_count() >= static_cast<std::size_t>(cfg.sampler.P)) {
            feasible = true;
            break;
        }
    }
    if (!feasible) {
        log::warn("iteration %d: no camera pair holds %d accepted matches; "
                  "cross-camera training skipped",
                  iteration, cfg.sampler.P);
        return model;
    }
    AdamState opt = AdamState::init(model, cfg.adam);
    Rng rng = Rng::stream(cfg.seed, "train-cross", static_cast<std::uint64_t>(iteration));
    for (int step = 0; step < cfg.steps_cross; ++step) {
        const TripletBatch batch = sample_tccpc_batch(view, matches, cfg.sampler, rng);
        log_step("cross-camera", step, model, batch, cfg.margin);
        const Gradients grads = loss_gradient(model, batch, cfg.margin);
        adam_step(opt, model, grads);
    }
    return model;
}

namespace {

ordered_json record_json(const IterationRecord& rec) {
    ordered_json j;
    j["iteration"] = rec.iteration;
    if (rec.has_metrics) {
        j["cmc1"] = rec.metrics.cmc_at(1);
        j["cmc5"] = rec.metrics.cmc_at(5);
        j["cmc10"] = rec.metrics.cmc_at(10);
        j["cmc20"] = rec.metrics.cmc_at(20);
        j["map"] = rec.metrics.map;
    } else {
        j["cmc1"] = nullptr;
        j["cmc5"] = nullptr;
        j["cmc10"] = nullptr;
        j["cmc20"] = nullptr;
        j["map"] = nullptr;
    }
    if (rec.has_truth && rec.iteration > 0) {
        j["assoc_precision"] = rec.assoc.precision;
        j["assoc_recall"] = rec.assoc.recall;
        j["assoc_degenerate"] = rec.assoc.degenerate;
    } else {
        j["assoc_precision"] = nullptr;
        j["assoc_recall"] = nullptr;
        j["assoc_degenerate"] = nullptr;
    }
    j["accepted_matches"] = rec.accepted_total;
    ordered_json counts = ordered_json::object();
    for (const auto& [pair, n] : rec.match_counts) {
        counts[std::to_string(pair.first) + "-" + std::to_string(pair.second)] = n;
    }
    j["match_counts"] = counts;
    j["checkpoint"] = rec.checkpoint;
    return j;
}

}  // namespace

void save_metrics_json(const std::vector<IterationRecord>& records,
                       const std::filesystem::path& path) {
    ordered_json arr = ordered_json::array();
    for (const IterationRecord& rec : records) arr.push_back(record_json(rec));
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << arr.dump(2) << "\n";
    if (!out.good()) throw Error("failed writing " + path.string());
}

void save_cmc_csv(const MetricsReport& metrics, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << "rank,accuracy\n";
    char line[64];
    for (std::size_t r = 0; r < metrics.cmc.size(); ++r) {
        std::snprintf(line, sizeof(line), "%zu,%.17g\n", r + 1, metrics.cmc[r]);
        out << line;
    }
    if (!out.good()) throw Error("failed writing " + path.string());
}

ProgressiveResult run_progressive(const TrackletDataset& dataset, const CameraTopology& topology,
                                  const PipelineConfig& cfg, const GroundTruth* truth,
                                  const std::filesystem::path& out_dir) {
    cfg.validate();
    dataset.validate();
    if (cfg.weakly_supervised && !dataset.labeled) {
        throw ConfigError("pipeline.weakly_supervised requires identity labels");
    }

    // Training never sees identities unless weak supervision asks for them.
    TrackletDataset stripped;
    const TrackletDataset* view = &dataset;
    if (!cfg.weakly_supervised) {
        stripped = strip_labels(dataset);
        view = &stripped;
    }
    const bool eval_ok = dataset.labeled;
    const bool persist = !out_dir.empty();
    if (persist) std::filesystem::create_directories(out_dir);

    ProgressiveResult result;
    auto record_stage = [&](int iteration, const MatchSet* matches) {
        IterationRecord rec;
        rec.iteration = iteration;
        if (matches != nullptr) {
            for (const auto& [pair, assoc] : matches->pairs) {
                rec.match_counts[pair] = assoc.accepted_count();
            }
            rec.accepted_total = matches->accepted_count();
            if (truth != nullptr) {
                rec.assoc = association_pr(*matches, *truth);
                rec.has_truth = true;
            }
        }
        if (eval_ok) {
            rec.metrics = evaluate_retrieval(dataset, result.model, cfg.sampler.max_images,
                                             cfg.threads);
            rec.has_metrics = true;
            log::info("iteration %d: rank-1 %.4f mAP %.4f accepted %zu", iteration,
                      rec.metrics.cmc_at(1), rec.metrics.map, rec.accepted_total);
        }
        if (persist) {
            const std::string name = "model_iter" + std::to_string(iteration) + ".ckpt";
            save_checkpoint(result.model, out_dir / name);
            rec.checkpoint = name;
            if (rec.has_metrics) {
                save_cmc_csv(rec.metrics,
                             out_dir / ("cmc_iter" + std::to_string(iteration) + ".csv"));
            }
        }
        result.records.push_back(std::move(rec));
        if (persist) save_metrics_json(result.records, out_dir / "metrics.json");
    };

    result.model = train_within_camera(*view, cfg);
    record_stage(0, nullptr);

    const int rounds = cfg.progressive ? cfg.n_iterations : std::min(cfg.n_iterations, 1);
    for (int it = 1; it <= rounds; ++it) {
        AssociationParams ap = cfg.assoc;
        ap.max_images = cfg.sampler.max_images;
        ap.threads = cfg.threads;
        ap.feature_seed = Rng::stream(cfg.seed, "associate", static_cast<std::uint64_t>(it))
                              .next_u64();
        const MatchSet matches = associate_all(*view, result.model, topology, ap);
        if (persist) {
            save_matches_csv(matches, out_dir / ("matches_iter" + std::to_string(it) + ".csv"));
        }
        result.model =
            train_cross_camera(std::move(result.model), *view, matches, cfg, it);
        record_stage(it, &matches);
    }

    if (persist) {
        for (auto it = result.records.rbegin(); it != result.records.rend(); ++it) {
            if (it->has_metrics) {
                save_cmc_csv(it->metrics, out_dir / "cmc.csv");
                break;
            }
        }
    }
    return result;
}

}  // namespace tastr
