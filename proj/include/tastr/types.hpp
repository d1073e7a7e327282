#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "tastr/errors.hpp"

namespace tastr {

using TrackletId = std::int64_t;
using IdentityId = std::int64_t;

// Unordered camera pair stored as (min, max).
using CameraPair = std::pair<int, int>;

inline CameraPair make_camera_pair(int a, int b) {
    return a <= b ? CameraPair{a, b} : CameraPair{b, a};
}

// Per camera pair: mean transfer time and its deviation.
struct CameraPairStats {
    double t_bar = 0.0;  // seconds
    double sigma = 0.0;  // seconds
};

struct Frame {
    double t = 0.0;  // seconds, synchronized clock across cameras
    Eigen::VectorXd features;
};

// A contiguous within-camera observation of one person. Possibly a fragment
// of the full trajectory when tracking broke.
struct Tracklet {
    TrackletId id = 0;
    int camera = 0;
    double start_time = 0.0;
    double end_time = 0.0;
    std::vector<Frame> frames;  // timestamps strictly increasing
    std::optional<IdentityId> identity;  // evaluation / weak supervision only

    // Throws ParseError/DimensionError when an invariant is broken.
    void validate(Eigen::Index expected_dim) const;
};

struct TrackletDataset {
    std::vector<Tracklet> tracklets;
    std::set<int> cameras;
    Eigen::Index d_raw = 0;
    bool labeled = false;

    std::size_t size() const { return tracklets.size(); }

    // Tracklet indices grouped per camera, in dataset order.
    std::map<int, std::vector<std::size_t>> by_camera() const;

    const Tracklet* find(TrackletId id) const;

    // Full invariant check: unique ids, camera set coverage, per-tracklet checks.
    void validate() const;
};

// Identical dataset with identities removed; training code paths receive this
// view so the unsupervised path can never read labels.
TrackletDataset strip_labels(const TrackletDataset& dataset);

// Pairwise walking distances between cameras plus a nominal speed.
class CameraTopology {
public:
    CameraTopology() = default;
    explicit CameraTopology(double speed_mps) : speed_mps_(speed_mps) {}

    double speed_mps() const { return speed_mps_; }
    void set_speed_mps(double v) { speed_mps_ = v; }

    void set_path(int a, int b, double meters);

    // Throws TopologyError when the pair is absent.
    double path_meters(int a, int b) const;

    bool has_path(int a, int b) const;

    const std::map<CameraPair, double>& paths() const { return paths_; }

    void validate() const;

private:
    double speed_mps_ = 1.25;
    std::map<CameraPair, double> paths_;
};

// Complete topology over cameras 0..n-1 with path length growing in the
// camera index gap. Used by the simulator and as the CLI default.
CameraTopology default_topology(int num_cameras, double speed_mps = 1.25);

}  // namespace tastr
