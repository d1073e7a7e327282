#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "tastr/association.hpp"
#include "tastr/model.hpp"
#include "tastr/simulator.hpp"
#include "tastr/types.hpp"

namespace tastr {

// Seed for evaluation-time frame pooling. Fixed and independent of the run
// seed so a stored checkpoint re-evaluates to identical numbers anywhere.
inline constexpr std::uint64_t kEvalFeatureSeed = 0x7A57C0DEULL;

// Query/gallery split with per-pair validity. The gallery holds every
// labeled tracklet; a gallery entry is invalid for a query when it is the
// query itself or shares both identity and camera with it.
struct RetrievalProtocol {
    std::vector<TrackletId> query_ids;
    std::vector<TrackletId> gallery_ids;
    std::vector<IdentityId> query_identity;
    std::vector<IdentityId> gallery_identity;
    std::vector<int> query_camera;
    std::vector<int> gallery_camera;

    std::size_t num_queries() const { return query_ids.size(); }
    std::size_t num_gallery() const { return gallery_ids.size(); }

    bool valid(std::size_t q, std::size_t g) const {
        return gallery_ids[g] != query_ids[q] &&
               !(gallery_identity[g] == query_identity[q] &&
                 gallery_camera[g] == query_camera[q]);
    }
    bool positive(std::size_t q, std::size_t g) const {
        return valid(q, g) && gallery_identity[g] == query_identity[q];
    }

    void validate() const;  // ProtocolError when a query lacks positives
};

// One query per identity seen by at least two cameras: its lowest tracklet
// id. Requires identity labels.
RetrievalProtocol make_protocol(const TrackletDataset& dataset);

struct MetricsReport {
    std::vector<double> cmc;  // cmc[r-1] = accuracy at rank r
    double map = 0.0;
    double assoc_precision = 1.0;
    double assoc_recall = 0.0;
    bool assoc_degenerate = true;
    std::size_t num_queries = 0;
    std::size_t num_gallery = 0;
    std::size_t accepted_matches = 0;
    std::size_t true_pair_count = 0;

    // Accuracy at the given 1-based rank; past the curve end the value is
    // the final one (every query has matched by then).
    double cmc_at(int rank) const;
};

// CMC and mAP from a query x gallery distance matrix. Valid gallery sorted
// ascending per query, ties by gallery index; AP is the mean of
// precision-at-each-positive.
MetricsReport cmc_map(const Eigen::MatrixXd& dist, const RetrievalProtocol& protocol);

struct AssociationPr {
    double precision = 1.0;
    double recall = 0.0;
    bool degenerate = true;  // no accepted pairs
    std::size_t accepted = 0;
    std::size_t correct = 0;
    std::size_t true_pair_count = 0;
};

// Precision/recall of accepted matches over all camera pairs. An empty
// accepted set gives precision 1.0 flagged degenerate, recall 0.0.
AssociationPr association_pr(const MatchSet& matches, const GroundTruth& truth);

struct RematchResult {
    double rank1 = 0.0;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;  // tracklets with fewer than 3 frames
};

// Within-camera fragmentation probe: removes a random window from each
// tracklet's middle third, puts the piece before it in the query set and
// the piece after it in the gallery, and scores rank-1 rematching per
// camera.
RematchResult fragmentation_rematch_eval(const TrackletDataset& dataset,
                                         const EmbeddingModel& model, int max_images,
                                         std::uint64_t seed);

// Pooled features (fixed evaluation seed), protocol from labels, full
// distance matrix, then cmc_map. threads caps row parallelism.
MetricsReport evaluate_retrieval(const TrackletDataset& dataset, const EmbeddingModel& model,
                                 int max_images, int threads = 1);

}  // namespace tastr
