#pragma once

#include <filesystem>

#include "tastr/types.hpp"

namespace tastr {

// JSON Lines, one tracklet per record:
//   {"tracklet_id": int, "camera_id": int, "identity": int|null,
//    "frames": [{"t": seconds, "f": [float, ...]}, ...]}
// Parse errors name the offending line. Feature values round-trip bit-exactly.
TrackletDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const TrackletDataset& dataset, const std::filesystem::path& path);

// {"speed_mps": float, "paths": [{"a": int, "b": int, "meters": float}, ...]}
CameraTopology load_topology(const std::filesystem::path& path);
void save_topology(const CameraTopology& topology, const std::filesystem::path& path);

}  // namespace tastr
