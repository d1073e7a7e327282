#include "tastr/simulator.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <string>

#include "tastr/rng.hpp"

namespace tastr {

using nlohmann::ordered_json;

namespace {

constexpr double kFrameInterval = 0.1;  // seconds between consecutive frames

// Arrival window scales with the population so per-camera tracklet density
// stays roughly constant across config sizes.
double horizon_seconds(int num_identities) { return 40.0 * num_identities; }

Eigen::VectorXd unit_sphere_vector(int dim, Rng& rng) {
    Eigen::VectorXd v(dim);
    double norm2 = 0.0;
    do {
        for (int i = 0; i < dim; ++i) v[i] = rng.normal(0.0, 1.0);
        norm2 = v.squaredNorm();
    } while (norm2 == 0.0);
    return v / std::sqrt(norm2);
}

// Split a run of frames into tracklet fragments: with probability p the run
// splits at a uniform interior boundary into two parts, each of which may
// split again with the same probability.
void fragment(std::vector<Frame>&& frames, double p, Rng& rng, std::vector<std::vector<Frame>>& out) {
    if (frames.size() >= 2 && rng.uniform01() < p) {
        const auto cut = static_cast<std::size_t>(
            rng.uniform_int(1, static_cast<std::int64_t>(frames.size()) - 1));
        std::vector<Frame> head(frames.begin(), frames.begin() + static_cast<std::ptrdiff_t>(cut));
        std::vector<Frame> tail(frames.begin() + static_cast<std::ptrdiff_t>(cut), frames.end());
        fragment(std::move(head), p, rng, out);
        fragment(std::move(tail), p, rng, out);
    } else {
        out.push_back(std::move(frames));
    }
}

struct Visit {
    int camera = 0;
    double arrival = 0.0;
    int num_frames = 0;
};

}  // namespace

void SimConfig::validate() const {
    if (num_identities < 1) throw ConfigError("num_identities must be >= 1");
    if (num_cameras < 2) throw ConfigError("num_cameras must be >= 2");
    if (d_raw < 1) throw ConfigError("d_raw must be >= 1");
    if (!(appearance_noise_std >= 0.0)) throw ConfigError("appearance_noise_std must be >= 0");
    if (!(camera_distortion_std >= 0.0)) throw ConfigError("camera_distortion_std must be >= 0");
    if (!(transfer_time_cv >= 0.0)) throw ConfigError("transfer_time_cv must be >= 0");
    if (!(fragmentation_prob >= 0.0 && fragmentation_prob <= 1.0)) {
        throw ConfigError("fragmentation_prob must be in [0, 1]");
    }
    if (!(distractor_fraction >= 0.0 && distractor_fraction <= 1.0)) {
        throw ConfigError("distractor_fraction must be in [0, 1]");
    }
    if (frames_per_visit_range.first < 1 ||
        frames_per_visit_range.second < frames_per_visit_range.first) {
        throw ConfigError("frames_per_visit_range must satisfy 1 <= min <= max");
    }
    topology.validate();
    for (int a = 0; a < num_cameras; ++a) {
        for (int b = a + 1; b < num_cameras; ++b) {
            if (!topology.has_path(a, b)) {
                throw ConfigError("topology missing path for cameras " + std::to_string(a) + "," +
                                  std::to_string(b));
            }
        }
    }
}

std::size_t GroundTruth::total_pairs() const {
    std::size_t n = 0;
    for (const auto& [pair, v] : true_pairs) n += v.size();
    return n;
}

bool GroundTruth::contains_pair(int cam_a, int cam_b, TrackletId i, TrackletId j) const {
    auto it = true_pairs.find(make_camera_pair(cam_a, cam_b));
    if (it == true_pairs.end()) return false;
    const auto key = std::minmax(i, j);
    const std::pair<TrackletId, TrackletId> p{key.first, key.second};
    return std::find(it->second.begin(), it->second.end(), p) != it->second.end();
}

std::pair<TrackletDataset, GroundTruth> generate(const SimConfig& config) {
    config.validate();
    Rng rng = Rng::stream(config.seed, "simulator");

    const int n_ids = config.num_identities;
    const int n_cams = config.num_cameras;
    const int n_distractors =
        static_cast<int>(std::lround(config.distractor_fraction * n_ids));

    std::vector<Eigen::VectorXd> latents;
    latents.reserve(static_cast<std::size_t>(n_ids));
    for (int i = 0; i < n_ids; ++i) latents.push_back(unit_sphere_vector(config.d_raw, rng));

    std::vector<Eigen::VectorXd> camera_bias;
    camera_bias.reserve(static_cast<std::size_t>(n_cams));
    for (int c = 0; c < n_cams; ++c) {
        Eigen::VectorXd b(config.d_raw);
        for (int i = 0; i < config.d_raw; ++i) b[i] = rng.normal(0.0, config.camera_distortion_std);
        camera_bias.push_back(std::move(b));
    }

    // Which identities are distractors: the last n_distractors of a shuffled order.
    std::vector<int> order(static_cast<std::size_t>(n_ids));
    for (int i = 0; i < n_ids; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    std::vector<bool> is_distractor(static_cast<std::size_t>(n_ids), false);
    for (int i = 0; i < n_distractors; ++i) {
        is_distractor[static_cast<std::size_t>(order[static_cast<std::size_t>(n_ids - 1 - i)])] = true;
    }

    TrackletDataset ds;
    ds.d_raw = config.d_raw;
    ds.labeled = true;
    GroundTruth truth;
    const double horizon = horizon_seconds(n_ids);
    TrackletId next_id = 0;

    for (int id = 0; id < n_ids; ++id) {
        // Itinerary: distractors get one camera, everyone else two distinct ones.
        std::vector<Visit> visits;
        const int cam_first = static_cast<int>(rng.uniform_int(0, n_cams - 1));
        double t = rng.uniform(0.0, horizon);
        visits.push_back({cam_first, t, static_cast<int>(rng.uniform_int(
                                            config.frames_per_visit_range.first,
                                            config.frames_per_visit_range.second))});
        if (!is_distractor[static_cast<std::size_t>(id)]) {
            int cam_second = static_cast<int>(rng.uniform_int(0, n_cams - 2));
            if (cam_second >= cam_first) ++cam_second;
            const double mean_gap =
                config.topology.path_meters(cam_first, cam_second) / config.topology.speed_mps();
            const double std_gap = config.transfer_time_cv * mean_gap;
            double gap;
            do {
                gap = rng.normal(mean_gap, std_gap);
            } while (!(gap > 0.0));
            const double depart =
                visits[0].arrival + (visits[0].num_frames - 1) * kFrameInterval;
            visits.push_back({cam_second, depart + gap,
                              static_cast<int>(rng.uniform_int(
                                  config.frames_per_visit_range.first,
                                  config.frames_per_visit_range.second))});
        }

        std::map<int, std::vector<TrackletId>> ids_by_camera;
        for (const Visit& v : visits) {
            std::vector<Frame> frames;
            frames.reserve(static_cast<std::size_t>(v.num_frames));
            for (int k = 0; k < v.num_frames; ++k) {
                Frame f;
                f.t = v.arrival + k * kFrameInterval;
                f.features = latents[static_cast<std::size_t>(id)] +
                             camera_bias[static_cast<std::size_t>(v.camera)];
                for (int d = 0; d < config.d_raw; ++d) {
                    f.features[d] += rng.normal(0.0, config.appearance_noise_std);
                }
                frames.push_back(std::move(f));
            }
            std::vector<std::vector<Frame>> fragments;
            fragment(std::move(frames), config.fragmentation_prob, rng, fragments);
            for (auto& frag : fragments) {
                Tracklet t2;
                t2.id = next_id++;
                t2.camera = v.camera;
                t2.start_time = frag.front().t;
                t2.end_time = frag.back().t;
                t2.frames = std::move(frag);
                t2.identity = id;
                truth.identity_of[t2.id] = id;
                ids_by_camera[v.camera].push_back(t2.id);
                ds.cameras.insert(v.camera);
                ds.tracklets.push_back(std::move(t2));
            }
        }

        // All cross-camera same-identity pairs (fragment combinations included).
        for (auto it_a = ids_by_camera.begin(); it_a != ids_by_camera.end(); ++it_a) {
            for (auto it_b = std::next(it_a); it_b != ids_by_camera.end(); ++it_b) {
                auto& bucket = truth.true_pairs[make_camera_pair(it_a->first, it_b->first)];
                for (TrackletId ta : it_a->second) {
                    for (TrackletId tb : it_b->second) {
                        const auto key = std::minmax(ta, tb);
                        bucket.emplace_back(key.first, key.second);
                    }
                }
            }
        }
    }

    ds.validate();
    return {std::move(ds), std::move(truth)};
}

std::map<CameraPair, CameraPairStats> true_pair_stats(const SimConfig& config) {
    std::map<CameraPair, CameraPairStats> out;
    for (const auto& [pair, meters] : config.topology.paths()) {
        const double mean = meters / config.topology.speed_mps();
        out[pair] = CameraPairStats{mean, config.transfer_time_cv * mean};
    }
    return out;
}

void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write ground truth file: " + path.string());
    ordered_json doc;
    ordered_json labels = ordered_json::object();
    for (const auto& [tid, identity] : truth.identity_of) {
        labels[std::to_string(tid)] = identity;
    }
    doc["labels"] = std::move(labels);
    ordered_json pairs = ordered_json::array();
    for (const auto& [campair, v] : truth.true_pairs) {
        for (const auto& [i, j] : v) {
            ordered_json p;
            p["cam_a"] = campair.first;
            p["cam_b"] = campair.second;
            p["i"] = i;
            p["j"] = j;
            pairs.push_back(std::move(p));
        }
    }
    doc["pairs"] = std::move(pairs);
    out << doc.dump(2) << '\n';
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open ground truth file: " + path.string());
    ordered_json doc;
    try {
        in >> doc;
    } catch (const ordered_json::parse_error& e) {
        throw ParseError(std::string("ground truth: ") + e.what());
    }
    GroundTruth truth;
    try {
        for (const auto& [key, value] : doc.at("labels").items()) {
            truth.identity_of[std::stoll(key)] = value.get<IdentityId>();
        }
        for (const auto& p : doc.at("pairs")) {
            const auto pair = make_camera_pair(p.at("cam_a").get<int>(), p.at("cam_b").get<int>());
            const TrackletId i = p.at("i").get<TrackletId>();
            const TrackletId j = p.at("j").get<TrackletId>();
            truth.true_pairs[pair].emplace_back(std::min(i, j), std::max(i, j));
        }
    } catch (const ordered_json::exception& e) {
        throw ParseError(std::string("ground truth: ") + e.what());
    }
    return truth;
}

}  // namespace tastr
