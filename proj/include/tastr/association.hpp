#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "tastr/model.hpp"
#include "tastr/types.hpp"

namespace tastr {

// A cross-camera tracklet pair with its appearance and temporal evidence.
// a_tracklet belongs to the lower-numbered camera of the pair.
struct CandidatePair {
    TrackletId a_tracklet = 0;
    TrackletId b_tracklet = 0;
    double euclid = 0.0;   // appearance distance between pooled features
    double delta_t = 0.0;  // later start minus earlier end; may be negative
    double joint = 0.0;    // euclid / STR weight (== euclid when STR is off)
};

// Reciprocal-NN candidates of one camera pair plus per-candidate acceptance.
struct PairAssociation {
    std::vector<CandidatePair> candidates;
    std::vector<std::uint8_t> accepted;  // parallel to candidates

    std::size_t accepted_count() const;
};

// Accepted matches per camera pair. Within one pair each tracklet occurs in
// at most one candidate (reciprocal-NN is a partial matching).
struct MatchSet {
    std::map<CameraPair, PairAssociation> pairs;

    std::size_t accepted_count() const;
    std::size_t candidate_count() const;
    std::vector<std::pair<CameraPair, CandidatePair>> accepted_flat() const;
};

struct AssociationParams {
    double lambda = 0.7;  // sigma = lambda * t_bar
    int k = 3;            // clusters for match refinement
    bool use_str = true;
    bool use_kmeans = true;
    bool squared_sigma = false;  // denominator 2*sigma^2 instead of 2*sigma
    int max_images = 60;         // frames pooled per tracklet feature
    std::uint64_t feature_seed = 0;
    int threads = 1;

    void validate() const;  // throws ConfigError naming the field
};

// Transfer-time stats per topology path: t_bar = meters / speed,
// sigma = lambda * t_bar. Label-free.
std::map<CameraPair, CameraPairStats> estimate_pair_stats(const CameraTopology& topology,
                                                          double lambda);

// Gaussian plausibility of a transfer gap, in (0, 1], maximal at t_bar.
// The denominator is 2*sigma by default; squared_sigma selects the
// conventional 2*sigma^2.
double str_weight(double delta_t, const CameraPairStats& stats, bool squared_sigma = false);

// Signed gap between the two tracklets: later start_time minus earlier
// end_time, where "earlier" means smaller start_time (ties by id).
double transfer_delta_t(const Tracklet& a, const Tracklet& b);

// Appearance distance regularized by transfer-time plausibility. With STR
// off the joint distance equals the Euclidean one. The plausibility
// exponent is capped so the result stays finite.
CandidatePair joint_distance(const Tracklet& a, const Tracklet& b, const Eigen::VectorXd& xa,
                             const Eigen::VectorXd& xb, const CameraPairStats& stats,
                             bool use_str = true, bool squared_sigma = false);

// Mutual top-1 pairs under the joint distance: (i, j) survives iff j is
// i's argmin over cam_b and i is j's argmin over cam_a. Argmin ties go to
// the lowest index. Output is a partial matching ordered by cam_a index.
std::vector<CandidatePair> reciprocal_nn_candidates(const std::vector<const Tracklet*>& cam_a,
                                                    const std::vector<const Tracklet*>& cam_b,
                                                    const std::vector<Eigen::VectorXd>& feats_a,
                                                    const std::vector<Eigen::VectorXd>& feats_b,
                                                    const CameraPairStats& stats, bool use_str,
                                                    bool squared_sigma);

struct KmeansResult {
    std::vector<int> assignments;  // cluster index per input value
    std::vector<double> centers;   // size k, stale for clusters gone empty
    double cost = 0.0;             // within-cluster sum of squared deviations
    int iterations = 0;
    std::vector<double> cost_trace;  // cost after each Lloyd update
};

// Lloyd's algorithm on scalars. Centers start evenly spaced between the
// minimum and maximum value (midpoint when k == 1); assignment ties go to
// the lower-index center; an emptied cluster keeps its previous center.
// Stops at an assignment fixpoint or after max_iters.
KmeansResult kmeans_1d(const std::vector<double>& values, int k, int max_iters = 100);

// Per camera pair: keep only the candidates in the cluster of smallest
// Euclidean distances (k-means over euclid values, accept the nonempty
// cluster with the smallest center). Pairs with fewer than k candidates
// accept everything.
MatchSet select_matches(const std::map<CameraPair, std::vector<CandidatePair>>& candidates, int k);

// Full association pass over every camera pair present in the dataset:
// pooled features from the frozen model, reciprocal-NN on (joint or plain)
// distances, then k-means refinement or accept-all. Deterministic given
// inputs; params.threads caps per-pair parallelism.
MatchSet associate_all(const TrackletDataset& dataset, const EmbeddingModel& model,
                       const CameraTopology& topology, const AssociationParams& params);

// CSV export: pair_a,pair_b,tracklet_i,tracklet_j,euclid,delta_t,joint,accepted.
void save_matches_csv(const MatchSet& matches, const std::filesystem::path& path);

}  // namespace tastr
