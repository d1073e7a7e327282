#include "tastr/model.hpp"

#include <json.hpp>

#include <fstream>

#include "tastr/errors.hpp"

namespace tastr {

using nlohmann::ordered_json;

Arch arch_from_string(const std::string& s) {
    if (s == "linear") return Arch::Linear;
    if (s == "mlp") return Arch::Mlp;
    throw ConfigError("unknown architecture '" + s + "' (expected linear or mlp)");
}

std::string to_string(Arch a) { return a == Arch::Linear ? "linear" : "mlp"; }

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, scale);
    }
    return m;
}

}  // namespace

EmbeddingModel make_model(Arch arch, Eigen::Index d_raw, Eigen::Index d_emb, Eigen::Index hidden,
                          Rng& rng) {
    if (d_raw < 1 || d_emb < 1) throw ConfigError("model dimensions must be >= 1");
    EmbeddingModel m;
    m.arch = arch;
    if (arch == Arch::Linear) {
        m.w1 = random_matrix(d_emb, d_raw, rng);
        m.b1 = Eigen::VectorXd::Zero(d_emb);
    } else {
        if (hidden < 1) throw ConfigError("mlp hidden size must be >= 1");
        m.w1 = random_matrix(hidden, d_raw, rng);
        m.b1 = Eigen::VectorXd::Zero(hidden);
        m.w2 = random_matrix(d_emb, hidden, rng);
        m.b2 = Eigen::VectorXd::Zero(d_emb);
    }
    return m;
}

EmbeddingModel make_identity_model(Eigen::Index dim) {
    EmbeddingModel m;
    m.arch = Arch::Linear;
    m.w1 = Eigen::MatrixXd::Identity(dim, dim);
    m.b1 = Eigen::VectorXd::Zero(dim);
    return m;
}

Eigen::VectorXd embed(const EmbeddingModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.d_raw()) {
        throw DimensionError("embed: input dimension " + std::to_string(x.size()) +
                             " != model d_raw " + std::to_string(model.d_raw()));
    }
    if (model.arch == Arch::Linear) {
        return model.w1 * x + model.b1;
    }
    const Eigen::VectorXd h = (model.w1 * x + model.b1).array().tanh();
    return model.w2 * h + model.b2;
}

Eigen::VectorXd tracklet_feature(const EmbeddingModel& model, const Tracklet& t, int max_images,
                                 Rng& rng) {
    if (max_images < 1) throw ContractError("tracklet_feature: max_images must be >= 1");
    if (t.frames.empty()) throw ContractError("tracklet_feature: empty tracklet");
    const std::size_t n = t.frames.size();
    const std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(max_images));

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(model.d_emb());
    if (take == n) {
        for (const auto& f : t.frames) sum += embed(model, f.features);
    } else {
        for (std::size_t idx : rng.sample_without_replacement(n, take)) {
            sum += embed(model, t.frames[idx].features);
        }
    }
    return sum / static_cast<double>(take);
}

namespace {

ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const ordered_json& rows) {
    const auto r = static_cast<Eigen::Index>(rows.size());
    if (r == 0) return {};
    const auto c = static_cast<Eigen::Index>(rows[0].size());
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != c) {
            throw ParseError("checkpoint: ragged weight matrix");
        }
        for (Eigen::Index j = 0; j < c; ++j) {
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
        }
    }
    return m;
}

ordered_json vector_to_json(const Eigen::VectorXd& v) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Eigen::VectorXd vector_from_json(const ordered_json& vals) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = vals[i].get<double>();
    }
    return v;
}

}  // namespace

void save_checkpoint(const EmbeddingModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write checkpoint: " + path.string());
    ordered_json doc;
    doc["format"] = "tastr-ckpt-v1";
    doc["arch"] = to_string(model.arch);
    doc["d_raw"] = model.d_raw();
    doc["d_emb"] = model.d_emb();
    doc["hidden"] = model.hidden();
    doc["w1"] = matrix_to_json(model.w1);
    doc["b1"] = vector_to_json(model.b1);
    if (model.arch == Arch::Mlp) {
        doc["w2"] = matrix_to_json(model.w2);
        doc["b2"] = vector_to_json(model.b2);
    }
    out << doc.dump() << '\n';
}

EmbeddingModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open checkpoint: " + path.string());
    ordered_json doc;
    try {
        in >> doc;
    } catch (const ordered_json::parse_error& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "tastr-ckpt-v1") {
            throw ParseError("checkpoint: unknown format tag");
        }
        EmbeddingModel m;
        m.arch = arch_from_string(doc.at("arch").get<std::string>());
        m.w1 = matrix_from_json(doc.at("w1"));
        m.b1 = vector_from_json(doc.at("b1"));
        if (m.arch == Arch::Mlp) {
            m.w2 = matrix_from_json(doc.at("w2"));
            m.b2 = vector_from_json(doc.at("b2"));
        }
        if (!m.w1.allFinite() || !m.b1.allFinite() ||
            (m.arch == Arch::Mlp && (!m.w2.allFinite() || !m.b2.allFinite()))) {
            throw ParseError("checkpoint: non-finite weights");
        }
        return m;
    } catch (const ordered_json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
}

}  // namespace tastr
