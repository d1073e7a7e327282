#include "tastr/evaluation.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "tastr/errors.hpp"
#include "tastr/parallel.hpp"

namespace tastr {

void RetrievalProtocol::validate() const {
    if (query_ids.size() != query_identity.size() || query_ids.size() != query_camera.size() ||
        gallery_ids.size() != gallery_identity.size() ||
        gallery_ids.size() != gallery_camera.size()) {
        throw ContractError("retrieval protocol: column lengths disagree");
    }
    for (std::size_t q = 0; q < num_queries(); ++q) {
        bool has_positive = false;
        for (std::size_t g = 0; g < num_gallery(); ++g) {
            if (positive(q, g)) {
                has_positive = true;
                break;
            }
        }
        if (!has_positive) {
            throw ProtocolError("query tracklet " + std::to_string(query_ids[q]) +
                                " has no valid positive in the gallery");
        }
    }
}

RetrievalProtocol make_protocol(const TrackletDataset& dataset) {
    std::map<IdentityId, std::set<int>> cameras_of;
    std::map<IdentityId, TrackletId> lowest_id;
    RetrievalProtocol p;
    for (const Tracklet& t : dataset.tracklets) {
        if (!t.identity) continue;
        p.gallery_ids.push_back(t.id);
        p.gallery_identity.push_back(*t.identity);
        p.gallery_camera.push_back(t.camera);
        cameras_of[*t.identity].insert(t.camera);
        auto [it, fresh] = lowest_id.emplace(*t.identity, t.id);
        if (!fresh && t.id < it->second) it->second = t.id;
    }
    if (p.gallery_ids.empty()) {
        throw ProtocolError("retrieval protocol requires identity labels");
    }
    for (const auto& [identity, cams] : cameras_of) {
        if (cams.size() < 2) continue;  // distractor: gallery only
        const TrackletId qid = lowest_id.at(identity);
        const Tracklet* t = dataset.find(qid);
        p.query_ids.push_back(qid);
        p.query_identity.push_back(identity);
        p.query_camera.push_back(t->camera);
    }
    if (p.query_ids.empty()) {
        throw ProtocolError("retrieval protocol: no identity appears in two cameras");
    }
    p.validate();
    return p;
}

double MetricsReport::cmc_at(int rank) const {
    if (cmc.empty() || rank < 1) return 0.0;
    const std::size_t r = std::min<std::size_t>(static_cast<std::size_t>(rank), cmc.size());
    return cmc[r - 1];
}

MetricsReport cmc_map(const Eigen::MatrixXd& dist, const RetrievalProtocol& protocol) {
    const std::size_t nq = protocol.num_queries();
    const std::size_t ng = protocol.num_gallery();
    if (static_cast<std::size_t>(dist.rows()) != nq ||
        static_cast<std::size_t>(dist.cols()) != ng) {
        throw ContractError("cmc_map: distance matrix shape does not match the protocol");
    }

    std::size_t max_valid = 0;
    std::vector<std::size_t> first_correct(nq);
    double ap_sum = 0.0;

    std::vector<std::size_t> order;
    for (std::size_t q = 0; q < nq; ++q) {
        order.clear();
        for (std::size_t g = 0; g < ng; ++g) {
            if (protocol.valid(q, g)) order.push_back(g);
        }
        max_valid = std::max(max_valid, order.size());
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return dist(q, a) < dist(q, b);  // stable keeps gallery-index ties
        });

        std::size_t positives = 0;
        std::size_t first = 0;
        double ap = 0.0;
        for (std::size_t r = 0; r < order.size(); ++r) {
            if (!protocol.positive(q, order[r])) continue;
            ++positives;
            if (positives == 1) first = r + 1;
            ap += static_cast<double>(positives) / static_cast<double>(r + 1);
        }
        if (positives == 0) {
            throw ProtocolError("query tracklet " + std::to_string(protocol.query_ids[q]) +
                                " has no valid positive in the gallery");
        }
        ap_sum += ap / static_cast<double>(positives);
        first_correct[q] = first;
    }

    MetricsReport report;
    report.num_queries = nq;
    report.num_gallery = ng;
    report.map = ap_sum / static_cast<double>(nq);
    report.cmc.assign(max_valid, 0.0);
    for (std::size_t q = 0; q < nq; ++q) {
        report.cmc[first_correct[q] - 1] += 1.0;
    }
    double running = 0.0;
    for (double& v : report.cmc) {
        running += v;
        v = running / static_cast<double>(nq);
    }
    return report;
}

AssociationPr association_pr(const MatchSet& matches, const GroundTruth& truth) {
    AssociationPr pr;
    pr.true_pair_count = truth.total_pairs();
    for (const auto& [pair, assoc] : matches.pairs) {
        for (std::size_t i = 0; i < assoc.candidates.size(); ++i) {
            if (!assoc.accepted[i]) continue;
            ++pr.accepted;
            if (truth.contains_pair(pair.first, pair.second, assoc.candidates[i].a_tracklet,
                                    assoc.candidates[i].b_tracklet)) {
                ++pr.correct;
            }
        }
    }
    pr.degenerate = pr.accepted == 0;
    pr.precision = pr.degenerate
                       ? 1.0
                       : static_cast<double>(pr.correct) / static_cast<double>(pr.accepted);
    pr.recall = pr.true_pair_count == 0 ? 1.0
                                        : static_cast<double>(pr.correct) /
                                              static_cast<double>(pr.true_pair_count);
    return pr;
}

namespace {

Tracklet make_piece(const Tracklet& t, std::size_t begin, std::size_t end) {
    Tracklet piece;
    piece.id = t.id;
    piece.camera = t.camera;
    piece.identity = t.identity;
    piece.frames.assign(t.frames.begin() + static_cast<std::ptrdiff_t>(begin),
                        t.frames.begin() + static_cast<std::ptrdiff_t>(end));
    piece.start_time = piece.frames.front().t;
    piece.end_time = piece.frames.back().t;
    return piece;
}

}  // namespace

RematchResult fragmentation_rematch_eval(const TrackletDataset& dataset,
                                         const EmbeddingModel& model, int max_images,
                                         std::uint64_t seed) {
    struct Piece {
        TrackletId source;
        Eigen::VectorXd feature;
    };
    std::map<int, std::vector<Piece>> queries, galleries;

    RematchResult res;
    for (const Tracklet& t : dataset.tracklets) {
        const std::size_t n = t.frames.size();
        if (n < 3) {
            ++res.skipped;
            continue;
        }
        const std::size_t mid_lo = n / 3;
        const std::size_t mid_hi = 2 * n / 3;
        Rng split = Rng::stream(seed, "rematch-split", static_cast<std::uint64_t>(t.id));
        const std::size_t len =
            1 + split.index(mid_hi - mid_lo);  // removed window length
        const std::size_t start = mid_lo + split.index(mid_hi - mid_lo - len + 1);

        const Tracklet before = make_piece(t, 0, start);
        const Tracklet after = make_piece(t, start + len, n);
        Rng rng_q = Rng::stream(seed, "rematch-feature-q", static_cast<std::uint64_t>(t.id));
        Rng rng_g = Rng::stream(seed, "rematch-feature-g", static_cast<std::uint64_t>(t.id));
        queries[t.camera].push_back({t.id, tracklet_feature(model, before, max_images, rng_q)});
        galleries[t.camera].push_back({t.id, tracklet_feature(model, after, max_images, rng_g)});
    }

    std::size_t correct = 0;
    for (const auto& [cam, qs] : queries) {
        const auto& gs = galleries.at(cam);
        for (const Piece& q : qs) {
            std::size_t best = 0;
            double best_d = (q.feature - gs[0].feature).norm();
            for (std::size_t g = 1; g < gs.size(); ++g) {
                const double d = (q.feature - gs[g].feature).norm();
                if (d < best_d) {
                    best = g;
                    best_d = d;
                }
            }
            ++res.evaluated;
            correct += gs[best].source == q.source;
        }
    }
    if (res.evaluated > 0) {
        res.rank1 = static_cast<double>(correct) / static_cast<double>(res.evaluated);
    }
    return res;
}

MetricsReport evaluate_retrieval(const TrackletDataset& dataset, const EmbeddingModel& model,
                                 int max_images, int threads) {
    const RetrievalProtocol protocol = make_protocol(dataset);

    std::map<TrackletId, std::size_t> row_of;
    for (std::size_t g = 0; g < protocol.num_gallery(); ++g) {
        row_of.emplace(protocol.gallery_ids[g], g);
    }
    std::vector<Eigen::VectorXd> feats(protocol.num_gallery());
    parallel_for(protocol.num_gallery(), threads, [&](std::size_t g) {
        const Tracklet* t = dataset.find(protocol.gallery_ids[g]);
        Rng rng = Rng::stream(kEvalFeatureSeed, "eval-feature",
                              static_cast<std::uint64_t>(t->id));
        feats[g] = tracklet_feature(model, *t, max_images, rng);
    });

    Eigen::MatrixXd dist(protocol.num_queries(), protocol.num_gallery());
    parallel_for(protocol.num_queries(), threads, [&](std::size_t q) {
        const Eigen::VectorXd& fq = feats[row_of.at(protocol.query_ids[q])];
        for (std::size_t g = 0; g < protocol.num_gallery(); ++g) {
            dist(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(g)) =
                (fq - feats[g]).norm();
        }
    });
    return cmc_map(dist, protocol);
}

}  // namespace tastr
