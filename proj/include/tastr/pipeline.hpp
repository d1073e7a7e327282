#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tastr/adam.hpp"
#include "tastr/association.hpp"
#include "tastr/evaluation.hpp"
#include "tastr/model.hpp"
#include "tastr/sampling.hpp"
#include "tastr/simulator.hpp"
#include "tastr/types.hpp"

namespace tastr {

struct ModelConfig {
    Arch arch = Arch::Linear;
    int d_emb = 64;
    int hidden = 64;  // mlp only
};

struct PipelineConfig {
    SamplerConfig sampler;
    ModelConfig model;
    AdamConfig adam;
    AssociationParams assoc;  // max_images, feature_seed and threads are set per run
    double margin = 0.3;
    int steps_s1 = 2000;
    int steps_cross = 1000;
    int n_iterations = 5;
    bool progressive = true;  // false: a single association + training pass
    bool weakly_supervised = false;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;  // throws ConfigError naming the field
};

// One pipeline stage: index 0 is the within-camera model, index i >= 1 the
// model after the i-th association + cross-camera training round.
struct IterationRecord {
    int iteration = 0;
    std::map<CameraPair, std::size_t> match_counts;
    std::size_t accepted_total = 0;
    AssociationPr assoc;  // meaningful only when has_truth
    bool has_truth = false;
    bool has_metrics = false;
    MetricsReport metrics;  // retrieval metrics, when labels allow evaluation
    std::string checkpoint;  // file name within the run directory, may be empty
};

// Within-camera training from random initialization on TCSCC batches (or
// identity-grouped batches in weakly supervised mode).
EmbeddingModel train_within_camera(const TrackletDataset& view, const PipelineConfig& cfg);

// Fine-tunes the given weights on TCCPC batches over the accepted matches.
// A match set with no pair holding P trainable pseudo-identities leaves the
// model unchanged with a warning. The iteration index separates RNG
// streams across rounds.
EmbeddingModel train_cross_camera(EmbeddingModel model, const TrackletDataset& view,
                                  const MatchSet& matches, const PipelineConfig& cfg,
                                  int iteration = 1);

struct ProgressiveResult {
    EmbeddingModel model;
    std::vector<IterationRecord> records;
};

// Full procedure: within-camera training once, then alternating
// association and cross-camera training. Labels are stripped from the
// training view unless weakly_supervised; evaluation uses the labeled
// dataset when available. With out_dir set, writes model_iter<N>.ckpt,
// matches_iter<N>.csv, cmc_iter<N>.csv, metrics.json and cmc.csv there,
// updating metrics.json after every completed stage.
ProgressiveResult run_progressive(const TrackletDataset& dataset, const CameraTopology& topology,
                                  const PipelineConfig& cfg, const GroundTruth* truth = nullptr,
                                  const std::filesystem::path& out_dir = {});

void save_metrics_json(const std::vector<IterationRecord>& records,
                       const std::filesystem::path& path);
void save_cmc_csv(const MetricsReport& metrics, const std::filesystem::path& path);

}  // namespace tastr
