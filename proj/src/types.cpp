#include "tastr/types.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

namespace tastr {

void Tracklet::validate(Eigen::Index expected_dim) const {
    const std::string tag = "tracklet " + std::to_string(id) + ": ";
    if (frames.empty()) throw ParseError(tag + "no frames");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (!frames[i].features.allFinite()) {
            throw ParseError(tag + "non-finite feature value in frame " + std::to_string(i));
        }
        if (frames[i].features.size() != expected_dim) {
            throw DimensionError(tag + "frame " + std::to_string(i) + " has dimension " +
                                 std::to_string(frames[i].features.size()) + ", expected " +
                                 std::to_string(expected_dim));
        }
        if (i > 0 && !(frames[i].t > frames[i - 1].t)) {
            throw ParseError(tag + "timestamps not strictly increasing at frame " +
                             std::to_string(i));
        }
    }
    if (start_time != frames.front().t) throw ParseError(tag + "start_time != first timestamp");
    if (end_time != frames.back().t) throw ParseError(tag + "end_time != last timestamp");
}

std::map<int, std::vector<std::size_t>> TrackletDataset::by_camera() const {
    std::map<int, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < tracklets.size(); ++i) {
        out[tracklets[i].camera].push_back(i);
    }
    return out;
}

const Tracklet* TrackletDataset::find(TrackletId id) const {
    for (const auto& t : tracklets) {
        if (t.id == id) return &t;
    }
    return nullptr;
}

void TrackletDataset::validate() const {
    if (tracklets.empty()) {
        throw IntegrityError("empty dataset: feature dimension undetermined");
    }
    std::unordered_set<TrackletId> seen;
    for (const auto& t : tracklets) {
        if (!seen.insert(t.id).second) {
            throw IntegrityError("duplicate tracklet_id " + std::to_string(t.id));
        }
        if (cameras.count(t.camera) == 0) {
            throw IntegrityError("camera_id " + std::to_string(t.camera) +
                                 " missing from camera set");
        }
        t.validate(d_raw);
    }
}

TrackletDataset strip_labels(const TrackletDataset& dataset) {
    TrackletDataset out = dataset;
    out.labeled = false;
    for (auto& t : out.tracklets) t.identity.reset();
    return out;
}

void CameraTopology::set_path(int a, int b, double meters) {
    if (a == b) throw TopologyError("path between a camera and itself");
    if (!(meters > 0.0)) {
        throw TopologyError("non-positive path length for cameras " + std::to_string(a) + "," +
                            std::to_string(b));
    }
    paths_[make_camera_pair(a, b)] = meters;
}

double CameraTopology::path_meters(int a, int b) const {
    auto it = paths_.find(make_camera_pair(a, b));
    if (it == paths_.end()) {
        throw TopologyError("no path between cameras " + std::to_string(a) + " and " +
                            std::to_string(b));
    }
    return it->second;
}

bool CameraTopology::has_path(int a, int b) const {
    return paths_.count(make_camera_pair(a, b)) > 0;
}

void CameraTopology::validate() const {
    if (!(speed_mps_ > 0.0) || !std::isfinite(speed_mps_)) {
        throw TopologyError("speed_mps must be positive and finite");
    }
    for (const auto& [pair, meters] : paths_) {
        if (!(meters > 0.0) || !std::isfinite(meters)) {
            throw TopologyError("invalid path length for cameras " + std::to_string(pair.first) +
                                "," + std::to_string(pair.second));
        }
    }
}

CameraTopology default_topology(int num_cameras, double speed_mps) {
    CameraTopology topo(speed_mps);
    for (int a = 0; a < num_cameras; ++a) {
        for (int b = a + 1; b < num_cameras; ++b) {
            topo.set_path(a, b, 70.0 + 50.0 * (b - a));
        }
    }
    return topo;
}

}  // namespace tastr
