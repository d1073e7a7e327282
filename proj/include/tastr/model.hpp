#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>

#include "tastr/rng.hpp"
#include "tastr/types.hpp"

namespace tastr {

enum class Arch { Linear, Mlp };

Arch arch_from_string(const std::string& s);  // "linear" | "mlp"
std::string to_string(Arch a);

// Trainable map from raw feature space to embedding space.
//   Linear: e = w1 x + b1
//   Mlp:    e = w2 tanh(w1 x + b1) + b2
struct EmbeddingModel {
    Arch arch = Arch::Linear;
    Eigen::MatrixXd w1;  // (hidden|d_emb) x d_raw
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // d_emb x hidden, Mlp only
    Eigen::VectorXd b2;

    Eigen::Index d_raw() const { return w1.cols(); }
    Eigen::Index d_emb() const { return arch == Arch::Linear ? w1.rows() : w2.rows(); }
    Eigen::Index hidden() const { return arch == Arch::Mlp ? w1.rows() : 0; }
};

// Random initialization: weights ~ N(0, 1/sqrt(fan_in)), biases zero.
EmbeddingModel make_model(Arch arch, Eigen::Index d_raw, Eigen::Index d_emb, Eigen::Index hidden,
                          Rng& rng);

// Identity linear map (d_raw == d_emb), for tests and noise-free baselines.
EmbeddingModel make_identity_model(Eigen::Index dim);

Eigen::VectorXd embed(const EmbeddingModel& model, const Eigen::VectorXd& x);

// Pooled tracklet descriptor: samples min(|frames|, max_images) frames
// without replacement, embeds each, returns the arithmetic mean.
Eigen::VectorXd tracklet_feature(const EmbeddingModel& model, const Tracklet& t, int max_images,
                                 Rng& rng);

// JSON checkpoint with architecture tag, dimensions, and row-major weights.
// Weight values round-trip bit-exactly.
void save_checkpoint(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_checkpoint(const std::filesystem::path& path);

}  // namespace tastr
