#pragma once

#include <cstdint>
#include <vector>

#include "tastr/association.hpp"
#include "tastr/rng.hpp"
#include "tastr/triplet.hpp"
#include "tastr/types.hpp"

namespace tastr {

struct SamplerConfig {
    int P = 4;                  // pseudo-labels per batch
    int K = 4;                  // items per pseudo-label
    double time_gap_T = 120.0;  // TCSCC pairwise separation threshold, seconds
    int max_images = 60;        // frames pooled per tracklet feature

    void validate() const;  // throws ConfigError naming the field
};

// One pseudo-label: a single tracklet in the within-camera stage, or the
// two tracklets of an accepted cross-camera match.
struct PseudoIdentity {
    std::int64_t id = 0;
    std::vector<TrackletId> members;
    CameraPair pair{0, 0};  // camera pair tag for TCCPC grouping
};

// Flattened accepted matches as pseudo-identities, ids sequential in
// (camera pair, candidate) order.
std::vector<PseudoIdentity> pseudo_identities(const MatchSet& matches);

// Temporal separation between two tracklets: the gap between their closest
// endpoints. Negative when they overlap in time.
double temporal_gap(const Tracklet& a, const Tracklet& b);

// Indices into `tracklets` forming a maximum-size subset whose pairwise
// temporal gaps all exceed gap. Earliest-end greedy over the time order,
// which is exact for this chain structure.
std::vector<std::size_t> max_separated_subset(const std::vector<const Tracklet*>& tracklets,
                                              double gap);

// TCSCC: picks one camera uniformly among those admitting P tracklets with
// pairwise gaps > time_gap_T, selects such a subset (randomized greedy with
// restarts, exact greedy fallback), then draws K frame features per
// tracklet (without replacement when it has >= K frames). Tracklets stay
// eligible for future batches.
TripletBatch sample_tcscc_batch(const TrackletDataset& dataset, const SamplerConfig& cfg,
                                Rng& rng);

// Weakly supervised variant: pseudo-labels are the given per-camera
// identities (all tracklets of one identity in one camera form a group)
// and the time-gap constraint is dropped.
TripletBatch sample_weak_within_camera_batch(const TrackletDataset& dataset,
                                             const SamplerConfig& cfg, Rng& rng);

// TCCPC: picks one camera pair uniformly among those with >= P accepted
// matches, selects P of its pseudo-identities, and draws K items per
// pseudo-identity from the union of its two tracklets' frames with at
// least one frame from each camera when K >= 2.
TripletBatch sample_tccpc_batch(const TrackletDataset& dataset, const MatchSet& matches,
                                const SamplerConfig& cfg, Rng& rng);

}  // namespace tastr
