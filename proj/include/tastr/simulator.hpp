#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <utility>
#include <vector>

#include "tastr/types.hpp"

namespace tastr {

struct SimConfig {
    int num_identities = 200;
    int num_cameras = 6;
    CameraTopology topology = default_topology(6);
    int d_raw = 64;
    double appearance_noise_std = 0.1;     // per-frame feature noise
    double camera_distortion_std = 0.12;   // per-camera additive bias
    double transfer_time_cv = 0.08;        // std / mean of transfer gaps
    double fragmentation_prob = 0.3;       // probability a visit splits
    double distractor_fraction = 0.2;      // identities seen by one camera only
    std::pair<int, int> frames_per_visit_range = {4, 60};
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError naming the field
};

struct GroundTruth {
    std::map<TrackletId, IdentityId> identity_of;
    // Per camera pair, all same-identity cross-camera tracklet pairs,
    // each stored as (min tracklet id, max tracklet id).
    std::map<CameraPair, std::vector<std::pair<TrackletId, TrackletId>>> true_pairs;

    std::size_t total_pairs() const;
    bool contains_pair(int cam_a, int cam_b, TrackletId i, TrackletId j) const;
};

// Synthetic camera-network world. Each identity owns a latent appearance
// vector on the unit sphere; a camera visit emits frames at 0.1 s spacing
// whose features are latent + camera bias + per-frame noise. Non-distractor
// identities visit exactly two distinct cameras; the arrival gap between the
// visits is a truncated normal with mean path/speed and std cv * mean.
// Deterministic: same config (including seed) gives bit-identical output.
std::pair<TrackletDataset, GroundTruth> generate(const SimConfig& config);

// The generative-law transfer stats per camera pair (oracle for the
// label-free estimate used in association).
std::map<CameraPair, CameraPairStats> true_pair_stats(const SimConfig& config);

// Ground-truth JSON: {"labels": {tid: identity, ...},
//                     "pairs": [{"cam_a":..,"cam_b":..,"i":..,"j":..}, ...]}
void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);

}  // namespace tastr
