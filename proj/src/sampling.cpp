#include "tastr/sampling.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "tastr/errors.hpp"

namespace tastr {

namespace {

// Restart budget for the randomized subset selection before falling back
// to the deterministic greedy chain.
constexpr int kSelectionRestarts = 20;

std::vector<const Tracklet*> camera_tracklets(const TrackletDataset& dataset,
                                              const std::vector<std::size_t>& indices) {
    std::vector<const Tracklet*> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(&dataset.tracklets[i]);
    return out;
}

// K frame indices from a tracklet with n frames: distinct when n >= K,
// with replacement otherwise.
std::vector<std::size_t> draw_frames(std::size_t n, int k, Rng& rng) {
    if (n >= static_cast<std::size_t>(k)) {
        return rng.sample_without_replacement(n, static_cast<std::size_t>(k));
    }
    std::vector<std::size_t> out(static_cast<std::size_t>(k));
    for (auto& idx : out) idx = rng.index(n);
    return out;
}

}  // namespace

void SamplerConfig::validate() const {
    if (P < 2) throw ConfigError("sampler.P must be >= 2");
    if (K < 2) throw ConfigError("sampler.K must be >= 2");
    if (time_gap_T < 0.0) throw ConfigError("sampler.time_gap_T must be >= 0");
    if (max_images < 1) throw ConfigError("sampler.max_images must be >= 1");
}

std::vector<PseudoIdentity> pseudo_identities(const MatchSet& matches) {
    std::vector<PseudoIdentity> out;
    std::int64_t next_id = 0;
    for (const auto& [pair, assoc] : matches.pairs) {
        for (std::size_t i = 0; i < assoc.candidates.size(); ++i) {
            if (!assoc.accepted[i]) continue;
            PseudoIdentity p;
            p.id = next_id++;
            p.members = {assoc.candidates[i].a_tracklet, assoc.candidates[i].b_tracklet};
            p.pair = pair;
            out.push_back(std::move(p));
        }
    }
    return out;
}

double temporal_gap(const Tracklet& a, const Tracklet& b) {
    return std::max(a.start_time - b.end_time, b.start_time - a.end_time);
}

std::vector<std::size_t> max_separated_subset(const std::vector<const Tracklet*>& tracklets,
                                              double gap) {
    std::vector<std::size_t> order(tracklets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (tracklets[a]->end_time != tracklets[b]->end_time) {
            return tracklets[a]->end_time < tracklets[b]->end_time;
        }
        return a < b;
    });
    // Earliest-end greedy. Any pairwise-separated subset is a chain in time
    // order, so the maximum chain is the maximum subset.
    std::vector<std::size_t> picked;
    bool have_last = false;
    double last_end = 0.0;
    for (std::size_t idx : order) {
        if (!have_last || tracklets[idx]->start_time - last_end > gap) {
            picked.push_back(idx);
            last_end = tracklets[idx]->end_time;
            have_last = true;
        }
    }
    return picked;
}

TripletBatch sample_tcscc_batch(const TrackletDataset& dataset, const SamplerConfig& cfg,
                                Rng& rng) {
    cfg.validate();
    const auto by_cam = dataset.by_camera();

    std::vector<int> feasible;
    std::map<int, std::vector<const Tracklet*>> pool;
    for (const auto& [cam, indices] : by_cam) {
        auto ts = camera_tracklets(dataset, indices);
        if (max_separated_subset(ts, cfg.time_gap_T).size() >= static_cast<std::size_t>(cfg.P)) {
            feasible.push_back(cam);
        }
        pool.emplace(cam, std::move(ts));
    }
    if (feasible.empty()) {
        std::ostringstream os;
        os << "TCSCC infeasible: no camera holds " << cfg.P
           << " tracklets pairwise separated by more than " << cfg.time_gap_T << " s";
        throw SamplingError(os.str());
    }

    const int cam = feasible[rng.index(feasible.size())];
    const auto& ts = pool[cam];

    // Randomized greedy for selection diversity; the greedy chain fallback
    // is exact, so a feasible camera always yields a batch.
    std::vector<std::size_t> chosen;
    for (int attempt = 0; attempt < kSelectionRestarts && chosen.empty(); ++attempt) {
        std::vector<std::size_t> order(ts.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        std::vector<std::size_t> sel;
        for (std::size_t idx : order) {
            bool ok = true;
            for (std::size_t s : sel) {
                if (!(temporal_gap(*ts[idx], *ts[s]) > cfg.time_gap_T)) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                sel.push_back(idx);
                if (sel.size() == static_cast<std::size_t>(cfg.P)) break;
            }
        }
        if (sel.size() == static_cast<std::size_t>(cfg.P)) chosen = std::move(sel);
    }
    if (chosen.empty()) {
        const auto chain = max_separated_subset(ts, cfg.time_gap_T);
        auto pick = rng.sample_without_replacement(chain.size(),
                                                   static_cast<std::size_t>(cfg.P));
        std::sort(pick.begin(), pick.end());
        for (std::size_t p : pick) chosen.push_back(chain[p]);
    }

    TripletBatch batch;
    batch.num_labels = cfg.P;
    batch.items_per_label = cfg.K;
    batch.provenance = "tcscc";
    for (int label = 0; label < cfg.P; ++label) {
        const Tracklet& t = *ts[chosen[label]];
        for (std::size_t f : draw_frames(t.frames.size(), cfg.K, rng)) {
            batch.items.push_back(t.frames[f].features);
            batch.labels.push_back(label);
        }
    }
    batch.validate();
    return batch;
}

TripletBatch sample_weak_within_camera_batch(const TrackletDataset& dataset,
                                             const SamplerConfig& cfg, Rng& rng) {
    cfg.validate();
    if (!dataset.labeled) {
        throw ContractError("weak within-camera sampling requires identity labels");
    }

    // Per camera, tracklets grouped by identity.
    std::map<int, std::map<IdentityId, std::vector<const Tracklet*>>> groups;
    for (const Tracklet& t : dataset.tracklets) {
        if (t.identity) groups[t.camera][*t.identity].push_back(&t);
    }
    std::vector<int> feasible;
    for (const auto& [cam, ids] : groups) {
        if (ids.size() >= static_cast<std::size_t>(cfg.P)) feasible.push_back(cam);
    }
    if (feasible.empty()) {
        std::ostringstream os;
        os << "weak within-camera sampling infeasible: no camera holds " << cfg.P
           << " labeled identities";
        throw SamplingError(os.str());
    }

    const int cam = feasible[rng.index(feasible.size())];
    const auto& ids = groups[cam];
    std::vector<IdentityId> keys;
    keys.reserve(ids.size());
    for (const auto& [identity, members] : ids) keys.push_back(identity);
    const auto pick =
        rng.sample_without_replacement(keys.size(), static_cast<std::size_t>(cfg.P));

    TripletBatch batch;
    batch.num_labels = cfg.P;
    batch.items_per_label = cfg.K;
    batch.provenance = "weak-within";
    for (int label = 0; label < cfg.P; ++label) {
        const auto& members = ids.at(keys[pick[label]]);
        // Union of the group's frames, in member order.
        std::vector<const Eigen::VectorXd*> frames;
        for (const Tracklet* t : members) {
            for (const Frame& f : t->frames) frames.push_back(&f.features);
        }
        for (std::size_t f : draw_frames(frames.size(), cfg.K, rng)) {
            batch.items.push_back(*frames[f]);
            batch.labels.push_back(label);
        }
    }
    batch.validate();
    return batch;
}

TripletBatch sample_tccpc_batch(const TrackletDataset& dataset, const MatchSet& matches,
                                const SamplerConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto pids = pseudo_identities(matches);

    std::map<CameraPair, std::vector<const PseudoIdentity*>> per_pair;
    for (const PseudoIdentity& p : pids) per_pair[p.pair].push_back(&p);
    std::vector<CameraPair> feasible;
    for (const auto& [pair, members] : per_pair) {
        if (members.size() >= static_cast<std::size_t>(cfg.P)) feasible.push_back(pair);
    }
    if (feasible.empty()) {
        std::ostringstream os;
        os << "TCCPC infeasible: no camera pair holds " << cfg.P << " accepted matches";
        throw SamplingError(os.str());
    }

    const CameraPair pair = feasible[rng.index(feasible.size())];
    const auto& members = per_pair[pair];
    const auto pick =
        rng.sample_without_replacement(members.size(), static_cast<std::size_t>(cfg.P));

    TripletBatch batch;
    batch.num_labels = cfg.P;
    batch.items_per_label = cfg.K;
    batch.provenance = "tccpc";
    for (int label = 0; label < cfg.P; ++label) {
        const PseudoIdentity& pid = *members[pick[label]];
        const Tracklet* ta = dataset.find(pid.members[0]);
        const Tracklet* tb = dataset.find(pid.members[1]);
        if (ta == nullptr || tb == nullptr) {
            throw IntegrityError("match references a tracklet id absent from the dataset");
        }
        const std::size_t na = ta->frames.size();
        const std::size_t nb = tb->frames.size();
        auto frame_at = [&](std::size_t u) -> const Eigen::VectorXd& {
            return u < na ? ta->frames[u].features : tb->frames[u - na].features;
        };

        // One frame from each camera first, then the rest from the union
        // (without replacement while it lasts).
        const std::size_t ia = rng.index(na);
        const std::size_t ib = na + rng.index(nb);
        std::vector<std::size_t> taken = {ia, ib};
        std::vector<std::size_t> rest;
        rest.reserve(na + nb - 2);
        for (std::size_t u = 0; u < na + nb; ++u) {
            if (u != ia && u != ib) rest.push_back(u);
        }
        const std::size_t need = static_cast<std::size_t>(cfg.K) - 2;
        if (need <= rest.size()) {
            for (std::size_t r : rng.sample_without_replacement(rest.size(), need)) {
                taken.push_back(rest[r]);
            }
        } else {
            taken.insert(taken.end(), rest.begin(), rest.end());
            for (std::size_t i = rest.size(); i < need; ++i) {
                taken.push_back(rng.index(na + nb));
            }
        }
        for (std::size_t u : taken) {
            batch.items.push_back(frame_at(u));
            batch.labels.push_back(label);
        }
    }
    batch.validate();
    return batch;
}

}  // namespace tastr
