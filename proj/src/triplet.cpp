#include "tastr/triplet.hpp"

#include <cmath>
#include <map>

#include "tastr/errors.hpp"

namespace tastr {

void TripletBatch::validate() const {
    if (num_labels < 2) throw ContractError("triplet batch needs P >= 2 (no negatives otherwise)");
    if (items_per_label < 1) throw ContractError("triplet batch needs K >= 1");
    const std::size_t expected =
        static_cast<std::size_t>(num_labels) * static_cast<std::size_t>(items_per_label);
    if (items.size() != expected || labels.size() != expected) {
        throw ContractError("triplet batch size mismatch: expected " + std::to_string(expected) +
                            " items");
    }
    std::map<int, int> counts;
    for (int l : labels) {
        if (l < 0 || l >= num_labels) throw ContractError("triplet batch label out of range");
        ++counts[l];
    }
    if (static_cast<int>(counts.size()) != num_labels) {
        throw ContractError("triplet batch must contain exactly P distinct labels");
    }
    for (const auto& [label, n] : counts) {
        if (n != items_per_label) {
            throw ContractError("label " + std::to_string(label) + " has " + std::to_string(n) +
                                " items, expected K = " + std::to_string(items_per_label));
        }
    }
}

namespace {

struct AnchorTerms {
    std::size_t hardest_pos = 0;
    std::size_t hardest_neg = 0;
    double d_pos = 0.0;
    double d_neg = 0.0;
    double inner = 0.0;  // margin + d_pos - d_neg
    bool active = false;
};

// Shared forward pass: pairwise distances plus per-anchor hardest pairs.
// The positive scan includes the anchor itself, matching the max over the
// anchor's whole label group; its zero distance never wins the max unless
// every positive distance is zero.
std::vector<AnchorTerms> anchor_terms(const std::vector<Eigen::VectorXd>& embeddings,
                                      const std::vector<int>& labels, double margin) {
    const std::size_t n = embeddings.size();
    if (labels.size() != n) throw ContractError("embeddings/labels size mismatch");
    if (n == 0) throw ContractError("empty batch");
    if (!(margin >= 0.0)) throw ContractError("margin must be >= 0");
    {
        std::map<int, int> counts;
        for (int l : labels) ++counts[l];
        if (counts.size() < 2) {
            throw ContractError("batch has fewer than 2 labels: no negatives exist");
        }
    }

    Eigen::MatrixXd dist(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = (embeddings[i] - embeddings[j]).norm();
            dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
            dist(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
        }
    }

    std::vector<AnchorTerms> terms(n);
    for (std::size_t a = 0; a < n; ++a) {
        AnchorTerms t;
        bool pos_found = false, neg_found = false;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = dist(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j));
            if (labels[j] == labels[a]) {
                if (!pos_found || d > t.d_pos) {  // strict > : lowest index wins ties
                    t.d_pos = d;
                    t.hardest_pos = j;
                    pos_found = true;
                }
            } else {
                if (!neg_found || d < t.d_neg) {
                    t.d_neg = d;
                    t.hardest_neg = j;
                    neg_found = true;
                }
            }
        }
        t.inner = margin + t.d_pos - t.d_neg;
        t.active = t.inner >= 0.0;  // hinge boundary counts as active
        terms[a] = t;
    }
    return terms;
}

}  // namespace

LossResult batch_hard_triplet_loss(const std::vector<Eigen::VectorXd>& embeddings,
                                   const std::vector<int>& labels, double margin) {
    const auto terms = anchor_terms(embeddings, labels, margin);
    LossResult out;
    out.active.resize(terms.size());
    for (std::size_t a = 0; a < terms.size(); ++a) {
        out.active[a] = terms[a].active ? 1 : 0;
        if (terms[a].inner > 0.0) out.loss += terms[a].inner;
    }
    return out;
}

Gradients Gradients::zeros_like(const EmbeddingModel& model) {
    Gradients g;
    g.w1 = Eigen::MatrixXd::Zero(model.w1.rows(), model.w1.cols());
    g.b1 = Eigen::VectorXd::Zero(model.b1.size());
    if (model.arch == Arch::Mlp) {
        g.w2 = Eigen::MatrixXd::Zero(model.w2.rows(), model.w2.cols());
        g.b2 = Eigen::VectorXd::Zero(model.b2.size());
    }
    return g;
}

bool Gradients::shapes_match(const EmbeddingModel& model) const {
    if (w1.rows() != model.w1.rows() || w1.cols() != model.w1.cols()) return false;
    if (b1.size() != model.b1.size()) return false;
    if (model.arch == Arch::Mlp) {
        if (w2.rows() != model.w2.rows() || w2.cols() != model.w2.cols()) return false;
        if (b2.size() != model.b2.size()) return false;
    }
    return true;
}

Gradients loss_gradient(const EmbeddingModel& model, const TripletBatch& batch, double margin) {
    batch.validate();
    const std::size_t n = batch.items.size();

    std::vector<Eigen::VectorXd> embeddings(n);
    std::vector<Eigen::VectorXd> hidden(model.arch == Arch::Mlp ? n : 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (model.arch == Arch::Linear) {
            embeddings[i] = model.w1 * batch.items[i] + model.b1;
        } else {
            hidden[i] = (model.w1 * batch.items[i] + model.b1).array().tanh();
            embeddings[i] = model.w2 * hidden[i] + model.b2;
        }
    }

    const auto terms = anchor_terms(embeddings, batch.labels, margin);

    // d loss / d embedding, accumulated over anchors.
    std::vector<Eigen::VectorXd> grad_e(n, Eigen::VectorXd::Zero(model.d_emb()));
    constexpr double kFloor = 1e-12;  // floor under the squared distance
    for (std::size_t a = 0; a < n; ++a) {
        if (!terms[a].active) continue;
        const std::size_t p = terms[a].hardest_pos;
        const std::size_t q = terms[a].hardest_neg;
        if (p != a) {
            const Eigen::VectorXd diff = embeddings[a] - embeddings[p];
            const double inv = 1.0 / std::sqrt(std::max(diff.squaredNorm(), kFloor));
            grad_e[a] += diff * inv;
            grad_e[p] -= diff * inv;
        }
        const Eigen::VectorXd diff_n = embeddings[a] - embeddings[q];
        const double inv_n = 1.0 / std::sqrt(std::max(diff_n.squaredNorm(), kFloor));
        grad_e[a] -= diff_n * inv_n;
        grad_e[q] += diff_n * inv_n;
    }

    Gradients g = Gradients::zeros_like(model);
    for (std::size_t i = 0; i < n; ++i) {
        if (model.arch == Arch::Linear) {
            g.w1.noalias() += grad_e[i] * batch.items[i].transpose();
            g.b1 += grad_e[i];
        } else {
            g.w2.noalias() += grad_e[i] * hidden[i].transpose();
            g.b2 += grad_e[i];
            const Eigen::VectorXd gh =
                (model.w2.transpose() * grad_e[i]).array() *
                (1.0 - hidden[i].array().square());
            g.w1.noalias() += gh * batch.items[i].transpose();
            g.b1 += gh;
        }
    }
    return g;
}

}  // namespace tastr
