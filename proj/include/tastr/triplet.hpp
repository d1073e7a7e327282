#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "tastr/model.hpp"

namespace tastr {

// P pseudo-labels, K items each; items are raw feature vectors.
struct TripletBatch {
    int num_labels = 0;       // P
    int items_per_label = 0;  // K
    std::vector<Eigen::VectorXd> items;  // size P*K
    std::vector<int> labels;             // values in [0, P)
    std::string provenance;              // sampler that produced it

    void validate() const;  // throws ContractError
};

struct LossResult {
    double loss = 0.0;
    std::vector<std::uint8_t> active;  // per anchor: hinge term contributed
};

// Batch-hard triplet loss: per anchor, [margin + hardest-positive distance
// - hardest-negative distance]+, summed over all anchors. Distance is plain
// Euclidean; ties in hardest-pair selection go to the lowest item index.
LossResult batch_hard_triplet_loss(const std::vector<Eigen::VectorXd>& embeddings,
                                   const std::vector<int>& labels, double margin);

// Gradient containers mirror the model's weight shapes.
struct Gradients {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;

    static Gradients zeros_like(const EmbeddingModel& model);
    bool shapes_match(const EmbeddingModel& model) const;
};

// Exact gradient of batch_hard_triplet_loss composed with embed over all
// batch items. At the hinge boundary the term counts as active; the
// distance gradient's denominator is floored at sqrt(1e-12) so coincident
// embeddings do not produce NaNs.
Gradients loss_gradient(const EmbeddingModel& model, const TripletBatch& batch, double margin);

}  // namespace tastr
