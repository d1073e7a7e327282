#include "tastr/association.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "tastr/errors.hpp"
#include "tastr/log.hpp"
#include "tastr/parallel.hpp"

namespace tastr {

namespace {

// Caps the STR exponent so euclid * exp(exponent) stays finite.
constexpr double kMaxExponent = 700.0;

std::string pair_label(const CameraPair& p) {
    std::ostringstream os;
    os << "(" << p.first << "," << p.second << ")";
    return os.str();
}

}  // namespace

std::size_t PairAssociation::accepted_count() const {
    std::size_t n = 0;
    for (std::uint8_t a : accepted) n += a != 0;
    return n;
}

std::size_t MatchSet::accepted_count() const {
    std::size_t n = 0;
    for (const auto& [pair, assoc] : pairs) n += assoc.accepted_count();
    return n;
}

std::size_t MatchSet::candidate_count() const {
    std::size_t n = 0;
    for (const auto& [pair, assoc] : pairs) n += assoc.candidates.size();
    return n;
}

std::vector<std::pair<CameraPair, CandidatePair>> MatchSet::accepted_flat() const {
    std::vector<std::pair<CameraPair, CandidatePair>> out;
    for (const auto& [pair, assoc] : pairs) {
        for (std::size_t i = 0; i < assoc.candidates.size(); ++i) {
            if (assoc.accepted[i]) out.emplace_back(pair, assoc.candidates[i]);
        }
    }
    return out;
}

void AssociationParams::validate() const {
    if (!(lambda > 0.0)) throw ConfigError("association.lambda must be > 0");
    if (k < 1) throw ConfigError("association.k must be >= 1");
    if (max_images < 1) throw ConfigError("association.max_images must be >= 1");
    if (threads < 1) throw ConfigError("association.threads must be >= 1");
}

std::map<CameraPair, CameraPairStats> estimate_pair_stats(const CameraTopology& topology,
                                                          double lambda) {
    if (!(lambda > 0.0)) throw ConfigError("association.lambda must be > 0");
    topology.validate();
    std::map<CameraPair, CameraPairStats> out;
    for (const auto& [pair, meters] : topology.paths()) {
        CameraPairStats s;
        s.t_bar = meters / topology.speed_mps();
        s.sigma = lambda * s.t_bar;
        out.emplace(pair, s);
    }
    return out;
}

double str_weight(double delta_t, const CameraPairStats& stats, bool squared_sigma) {
    const double denom =
        squared_sigma ? 2.0 * stats.sigma * stats.sigma : 2.0 * stats.sigma;
    const double diff = delta_t - stats.t_bar;
    return std::exp(-(diff * diff) / denom);
}

double transfer_delta_t(const Tracklet& a, const Tracklet& b) {
    const bool a_first =
        a.start_time < b.start_time || (a.start_time == b.start_time && a.id <= b.id);
    const Tracklet& earlier = a_first ? a : b;
    const Tracklet& later = a_first ? b : a;
    return later.start_time - earlier.end_time;
}

CandidatePair joint_distance(const Tracklet& a, const Tracklet& b, const Eigen::VectorXd& xa,
                             const Eigen::VectorXd& xb, const CameraPairStats& stats,
                             bool use_str, bool squared_sigma) {
    if (a.camera == b.camera) {
        throw ContractError("joint_distance: tracklets share camera " + std::to_string(a.camera));
    }
    CandidatePair c;
    c.a_tracklet = a.id;
    c.b_tracklet = b.id;
    c.euclid = (xa - xb).norm();
    c.delta_t = transfer_delta_t(a, b);
    if (!use_str) {
        c.joint = c.euclid;
        return c;
    }
    const double denom =
        squared_sigma ? 2.0 * stats.sigma * stats.sigma : 2.0 * stats.sigma;
    const double diff = c.delta_t - stats.t_bar;
    const double exponent = std::min((diff * diff) / denom, kMaxExponent);
    c.joint = std::min(c.euclid * std::exp(exponent), std::numeric_limits<double>::max());
    return c;
}

std::vector<CandidatePair> reciprocal_nn_candidates(const std::vector<const Tracklet*>& cam_a,
                                                    const std::vector<const Tracklet*>& cam_b,
                                                    const std::vector<Eigen::VectorXd>& feats_a,
                                                    const std::vector<Eigen::VectorXd>& feats_b,
                                                    const CameraPairStats& stats, bool use_str,
                                                    bool squared_sigma) {
    const std::size_t na = cam_a.size();
    const std::size_t nb = cam_b.size();
    if (na != feats_a.size() || nb != feats_b.size()) {
        throw ContractError("reciprocal_nn_candidates: tracklet/feature count mismatch");
    }
    if (na == 0 || nb == 0) return {};

    std::vector<std::vector<CandidatePair>> grid(na, std::vector<CandidatePair>(nb));
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 0; j < nb; ++j) {
            grid[i][j] = joint_distance(*cam_a[i], *cam_b[j], feats_a[i], feats_b[j], stats,
                                        use_str, squared_sigma);
        }
    }

    // Argmin with strict < keeps the lowest index on ties.
    std::vector<std::size_t> best_b(na, 0);
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 1; j < nb; ++j) {
            if (grid[i][j].joint < grid[i][best_b[i]].joint) best_b[i] = j;
        }
    }
    std::vector<std::size_t> best_a(nb, 0);
    for (std::size_t j = 0; j < nb; ++j) {
        for (std::size_t i = 1; i < na; ++i) {
            if (grid[i][j].joint < grid[best_a[j]][j].joint) best_a[j] = i;
        }
    }

    std::vector<CandidatePair> out;
    for (std::size_t i = 0; i < na; ++i) {
        const std::size_t j = best_b[i];
        if (best_a[j] == i) out.push_back(grid[i][j]);
    }
    return out;
}

KmeansResult kmeans_1d(const std::vector<double>& values, int k, int max_iters) {
    if (k < 1) throw ClusterError("kmeans_1d: k must be >= 1");
    const std::size_t n = values.size();
    if (n < static_cast<std::size_t>(k)) {
        throw ClusterError("kmeans_1d: " + std::to_string(n) + " values for k=" +
                           std::to_string(k));
    }
    if (max_iters < 1) throw ClusterError("kmeans_1d: max_iters must be >= 1");

    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;

    KmeansResult res;
    res.centers.resize(k);
    if (k == 1) {
        res.centers[0] = 0.5 * (lo + hi);
    } else {
        for (int i = 0; i < k; ++i) {
            res.centers[i] = lo + (hi - lo) * static_cast<double>(i) / (k - 1);
        }
    }

    auto assign_step = [&](std::vector<int>& assign) {
        for (std::size_t v = 0; v < n; ++v) {
            int best = 0;
            double best_d = std::abs(values[v] - res.centers[0]);
            for (int c = 1; c < k; ++c) {
                const double d = std::abs(values[v] - res.centers[c]);
                if (d < best_d) {
                    best = c;
                    best_d = d;
                }
            }
            assign[v] = best;
        }
    };
    auto cost_of = [&](const std::vector<int>& assign) {
        double cost = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            const double d = values[v] - res.centers[assign[v]];
            cost += d * d;
        }
        return cost;
    };

    res.assignments.resize(n);
    assign_step(res.assignments);
    res.cost_trace.push_back(cost_of(res.assignments));

    std::vector<double> sum(k);
    std::vector<std::size_t> count(k);
    std::vector<int> next(n);
    for (int iter = 0; iter < max_iters; ++iter) {
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(count.begin(), count.end(), std::size_t{0});
        for (std::size_t v = 0; v < n; ++v) {
            sum[res.assignments[v]] += values[v];
            ++count[res.assignments[v]];
        }
        for (int c = 0; c < k; ++c) {
            if (count[c] > 0) res.centers[c] = sum[c] / static_cast<double>(count[c]);
        }
        assign_step(next);
        res.cost_trace.push_back(cost_of(next));
        res.iterations = iter + 1;
        if (next == res.assignments) break;
        res.assignments = next;
    }
    res.cost = res.cost_trace.back();
    return res;
}

MatchSet select_matches(const std::map<CameraPair, std::vector<CandidatePair>>& candidates,
                        int k) {
    if (k < 1) throw ClusterError("select_matches: k must be >= 1");
    MatchSet out;
    for (const auto& [pair, list] : candidates) {
        PairAssociation assoc;
        assoc.candidates = list;
        assoc.accepted.assign(list.size(), 0);
        if (list.size() < static_cast<std::size_t>(k)) {
            std::fill(assoc.accepted.begin(), assoc.accepted.end(), std::uint8_t{1});
        } else {
            std::vector<double> values;
            values.reserve(list.size());
            for (const CandidatePair& c : list) values.push_back(c.euclid);
            const KmeansResult km = kmeans_1d(values, k);

            std::vector<std::size_t> count(k, 0);
            for (int a : km.assignments) ++count[a];
            int best = -1;
            for (int c = 0; c < k; ++c) {
                if (count[c] == 0) continue;
                if (best < 0 || km.centers[c] < km.centers[best]) best = c;
            }
            for (std::size_t i = 0; i < list.size(); ++i) {
                assoc.accepted[i] = km.assignments[i] == best ? 1 : 0;
            }
        }
        out.pairs.emplace(pair, std::move(assoc));
    }
    return out;
}

MatchSet associate_all(const TrackletDataset& dataset, const EmbeddingModel& model,
                       const CameraTopology& topology, const AssociationParams& params) {
    params.validate();
    if (dataset.d_raw != model.d_raw()) {
        throw DimensionError("associate_all: dataset d_raw=" + std::to_string(dataset.d_raw) +
                             " but model expects " + std::to_string(model.d_raw()));
    }

    const std::size_t n = dataset.size();
    std::vector<Eigen::VectorXd> feats(n);
    parallel_for(n, params.threads, [&](std::size_t i) {
        const Tracklet& t = dataset.tracklets[i];
        Rng rng = Rng::stream(params.feature_seed, "assoc-feature",
                              static_cast<std::uint64_t>(t.id));
        feats[i] = tracklet_feature(model, t, params.max_images, rng);
    });

    const auto by_cam = dataset.by_camera();
    std::vector<CameraPair> pairs;
    std::vector<CameraPairStats> stats;
    for (auto a = by_cam.begin(); a != by_cam.end(); ++a) {
        for (auto b = std::next(a); b != by_cam.end(); ++b) {
            const CameraPair pair = make_camera_pair(a->first, b->first);
            CameraPairStats s;
            s.t_bar = topology.path_meters(pair.first, pair.second) / topology.speed_mps();
            s.sigma = params.lambda * s.t_bar;
            pairs.push_back(pair);
            stats.push_back(s);
        }
    }

    std::vector<std::vector<CandidatePair>> found(pairs.size());
    parallel_for(pairs.size(), params.threads, [&](std::size_t p) {
        const auto& idx_a = by_cam.at(pairs[p].first);
        const auto& idx_b = by_cam.at(pairs[p].second);
        std::vector<const Tracklet*> trk_a, trk_b;
        std::vector<Eigen::VectorXd> fa, fb;
        trk_a.reserve(idx_a.size());
        fa.reserve(idx_a.size());
        for (std::size_t i : idx_a) {
            trk_a.push_back(&dataset.tracklets[i]);
            fa.push_back(feats[i]);
        }
        trk_b.reserve(idx_b.size());
        fb.reserve(idx_b.size());
        for (std::size_t i : idx_b) {
            trk_b.push_back(&dataset.tracklets[i]);
            fb.push_back(feats[i]);
        }
        found[p] = reciprocal_nn_candidates(trk_a, trk_b, fa, fb, stats[p], params.use_str,
                                            params.squared_sigma);
    });

    std::map<CameraPair, std::vector<CandidatePair>> cand_map;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        cand_map.emplace(pairs[p], std::move(found[p]));
    }

    MatchSet matches;
    if (params.use_kmeans) {
        matches = select_matches(cand_map, params.k);
    } else {
        for (auto& [pair, list] : cand_map) {
            PairAssociation assoc;
            assoc.accepted.assign(list.size(), 1);
            assoc.candidates = std::move(list);
            matches.pairs.emplace(pair, std::move(assoc));
        }
    }

    for (const auto& [pair, assoc] : matches.pairs) {
        log::debug("associate %s: %zu candidates, %zu accepted", pair_label(pair).c_str(),
                   assoc.candidates.size(), assoc.accepted_count());
    }
    log::info("association: %zu candidates, %zu accepted over %zu camera pairs",
              matches.candidate_count(), matches.accepted_count(), matches.pairs.size());
    return matches;
}

void save_matches_csv(const MatchSet& matches, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << "pair_a,pair_b,tracklet_i,tracklet_j,euclid,delta_t,joint,accepted\n";
    char line[256];
    for (const auto& [pair, assoc] : matches.pairs) {
        for (std::size_t i = 0; i < assoc.candidates.size(); ++i) {
            const CandidatePair& c = assoc.candidates[i];
            std::snprintf(line, sizeof(line), "%d,%d,%lld,%lld,%.17g,%.17g,%.17g,%d\n",
                          pair.first, pair.second, static_cast<long long>(c.a_tracklet),
                          static_cast<long long>(c.b_tracklet), c.euclid, c.delta_t, c.joint,
                          assoc.accepted[i] ? 1 : 0);
            out << line;
        }
    }
    if (!out.good()) throw Error("failed writing " + path.string());
}

}  // namespace tastr
