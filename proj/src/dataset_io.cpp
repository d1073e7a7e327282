#include "tastr/dataset_io.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace tastr {

using nlohmann::ordered_json;

namespace {

ordered_json parse_line(const std::string& line, std::size_t line_no) {
    try {
        return ordered_json::parse(line);
    } catch (const ordered_json::parse_error& e) {
        throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
}

Tracklet tracklet_from_json(const ordered_json& rec, std::size_t line_no) {
    const std::string tag = "line " + std::to_string(line_no) + ": ";
    try {
        Tracklet t;
        t.id = rec.at("tracklet_id").get<TrackletId>();
        t.camera = rec.at("camera_id").get<int>();
        if (rec.contains("identity") && !rec.at("identity").is_null()) {
            t.identity = rec.at("identity").get<IdentityId>();
        }
        const auto& frames = rec.at("frames");
        if (!frames.is_array()) throw ParseError(tag + "frames is not an array");
        t.frames.reserve(frames.size());
        for (const auto& fr : frames) {
            Frame f;
            f.t = fr.at("t").get<double>();
            const auto& vals = fr.at("f");
            f.features.resize(static_cast<Eigen::Index>(vals.size()));
            for (std::size_t i = 0; i < vals.size(); ++i) {
                f.features[static_cast<Eigen::Index>(i)] = vals[i].get<double>();
            }
            t.frames.push_back(std::move(f));
        }
        if (!t.frames.empty()) {
            t.start_time = t.frames.front().t;
            t.end_time = t.frames.back().t;
        }
        return t;
    } catch (const ordered_json::exception& e) {
        throw ParseError(tag + e.what());
    }
}

}  // namespace

TrackletDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset file: " + path.string());

    TrackletDataset ds;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const ordered_json rec = parse_line(line, line_no);
        Tracklet t = tracklet_from_json(rec, line_no);
        if (ds.tracklets.empty()) {
            if (t.frames.empty()) {
                throw ParseError("line " + std::to_string(line_no) + ": tracklet " +
                                 std::to_string(t.id) + ": no frames");
            }
            ds.d_raw = t.frames.front().features.size();
        }
        try {
            t.validate(ds.d_raw);
        } catch (const DimensionError& e) {
            throw DimensionError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (t.identity.has_value()) ds.labeled = true;
        ds.cameras.insert(t.camera);
        ds.tracklets.push_back(std::move(t));
    }
    ds.validate();  // empty file -> IntegrityError (dimension unknown)
    return ds;
}

void save_dataset(const TrackletDataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write dataset file: " + path.string());
    for (const auto& t : dataset.tracklets) {
        ordered_json rec;
        rec["tracklet_id"] = t.id;
        rec["camera_id"] = t.camera;
        if (t.identity.has_value()) {
            rec["identity"] = *t.identity;
        } else {
            rec["identity"] = nullptr;
        }
        ordered_json frames = ordered_json::array();
        for (const auto& f : t.frames) {
            ordered_json fr;
            fr["t"] = f.t;
            ordered_json vals = ordered_json::array();
            for (Eigen::Index i = 0; i < f.features.size(); ++i) vals.push_back(f.features[i]);
            fr["f"] = std::move(vals);
            frames.push_back(std::move(fr));
        }
        rec["frames"] = std::move(frames);
        out << rec.dump() << '\n';
    }
}

CameraTopology load_topology(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open topology file: " + path.string());
    ordered_json doc;
    try {
        in >> doc;
    } catch (const ordered_json::parse_error& e) {
        throw ParseError(std::string("topology: ") + e.what());
    }
    try {
        CameraTopology topo(doc.at("speed_mps").get<double>());
        for (const auto& p : doc.at("paths")) {
            topo.set_path(p.at("a").get<int>(), p.at("b").get<int>(),
                          p.at("meters").get<double>());
        }
        topo.validate();
        return topo;
    } catch (const ordered_json::exception& e) {
        throw ParseError(std::string("topology: ") + e.what());
    }
}

void save_topology(const CameraTopology& topology, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write topology file: " + path.string());
    ordered_json doc;
    doc["speed_mps"] = topology.speed_mps();
    ordered_json paths = ordered_json::array();
    for (const auto& [pair, meters] : topology.paths()) {
        ordered_json p;
        p["a"] = pair.first;
        p["b"] = pair.second;
        p["meters"] = meters;
        paths.push_back(std::move(p));
    }
    doc["paths"] = std::move(paths);
    out << doc.dump(2) << '\n';
}

}  // namespace tastr
