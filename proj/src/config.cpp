#include "tastr/config.hpp"

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "tastr/errors.hpp"

namespace tastr {

namespace {

enum class Kind { Int, Float, Bool, Str };

struct Value {
    Kind kind = Kind::Int;
    long long i = 0;
    double f = 0.0;
    bool b = false;
    std::string s;
};

struct FieldDef {
    const char* section;
    const char* key;
    Kind kind;
    std::function<void(Config&, const Value&)> set;
    std::function<Value(const Config&)> get;
};

Value int_value(long long v) {
    Value out;
    out.kind = Kind::Int;
    out.i = v;
    return out;
}

Value float_value(double v) {
    Value out;
    out.kind = Kind::Float;
    out.f = v;
    return out;
}

Value bool_value(bool v) {
    Value out;
    out.kind = Kind::Bool;
    out.b = v;
    return out;
}

Value str_value(std::string v) {
    Value out;
    out.kind = Kind::Str;
    out.s = std::move(v);
    return out;
}

long long checked_int(const Value& v, const std::string& name) {
    if (v.kind != Kind::Int) throw ConfigError(name + " expects an integer");
    return v.i;
}

// Float keys also accept integer literals.
double checked_float(const Value& v, const std::string& name) {
    if (v.kind == Kind::Int) return static_cast<double>(v.i);
    if (v.kind != Kind::Float) throw ConfigError(name + " expects a number");
    return v.f;
}

bool checked_bool(const Value& v, const std::string& name) {
    if (v.kind != Kind::Bool) throw ConfigError(name + " expects true or false");
    return v.b;
}

std::string checked_str(const Value& v, const std::string& name) {
    if (v.kind != Kind::Str) throw ConfigError(name + " expects a quoted string");
    return v.s;
}

std::uint64_t checked_seed(const Value& v, const std::string& name) {
    const long long i = checked_int(v, name);
    if (i < 0) throw ConfigError(name + " must be >= 0");
    return static_cast<std::uint64_t>(i);
}

int checked_int32(const Value& v, const std::string& name) {
    const long long i = checked_int(v, name);
    if (i < INT32_MIN || i > INT32_MAX) throw ConfigError(name + " is out of range");
    return static_cast<int>(i);
}

#define INT_FIELD(section, key, ref)                                                       \
    FieldDef {                                                                             \
        section, key, Kind::Int,                                                           \
            [](Config& c, const Value& v) { ref = checked_int32(v, section "." key); },    \
            [](const Config& c) { return int_value(ref); }                                 \
    }
#define SEED_FIELD(section, key, ref)                                                      \
    FieldDef {                                                                             \
        section, key, Kind::Int,                                                           \
            [](Config& c, const Value& v) { ref = checked_seed(v, section "." key); },     \
            [](const Config& c) { return int_value(static_cast<long long>(ref)); }         \
    }
#define FLOAT_FIELD(section, key, ref)                                                     \
    FieldDef {                                                                             \
        section, key, Kind::Float,                                                         \
            [](Config& c, const Value& v) { ref = checked_float(v, section "." key); },    \
            [](const Config& c) { return float_value(ref); }                               \
    }
#define BOOL_FIELD(section, key, ref)                                                      \
    FieldDef {                                                                             \
        section, key, Kind::Bool,                                                          \
            [](Config& c, const Value& v) { ref = checked_bool(v, section "." key); },     \
            [](const Config& c) { return bool_value(ref); }                                \
    }

const std::vector<FieldDef>& schema() {
    static const std::vector<FieldDef> defs = {
        INT_FIELD("simulator", "num_identities", c.sim.num_identities),
        INT_FIELD("simulator", "num_cameras", c.sim.num_cameras),
        INT_FIELD("simulator", "d_raw", c.sim.d_raw),
        FLOAT_FIELD("simulator", "appearance_noise_std", c.sim.appearance_noise_std),
        FLOAT_FIELD("simulator", "camera_distortion_std", c.sim.camera_distortion_std),
        FLOAT_FIELD("simulator", "transfer_time_cv", c.sim.transfer_time_cv),
        FLOAT_FIELD("simulator", "fragmentation_prob", c.sim.fragmentation_prob),
        FLOAT_FIELD("simulator", "distractor_fraction", c.sim.distractor_fraction),
        INT_FIELD("simulator", "frames_per_visit_min", c.sim.frames_per_visit_range.first),
        INT_FIELD("simulator", "frames_per_visit_max", c.sim.frames_per_visit_range.second),
        FieldDef{"simulator", "speed_mps", Kind::Float,
                 [](Config& c, const Value& v) {
                     c.sim.topology.set_speed_mps(checked_float(v, "simulator.speed_mps"));
                 },
                 [](const Config& c) { return float_value(c.sim.topology.speed_mps()); }},
        SEED_FIELD("simulator", "seed", c.sim.seed),

        INT_FIELD("sampler", "P", c.pipeline.sampler.P),
        INT_FIELD("sampler", "K", c.pipeline.sampler.K),
        FLOAT_FIELD("sampler", "time_gap_T", c.pipeline.sampler.time_gap_T),
        INT_FIELD("sampler", "max_images", c.pipeline.sampler.max_images),

        FieldDef{"model", "arch", Kind::Str,
                 [](Config& c, const Value& v) {
                     c.pipeline.model.arch = arch_from_string(checked_str(v, "model.arch"));
                 },
                 [](const Config& c) { return str_value(to_string(c.pipeline.model.arch)); }},
        INT_FIELD("model", "d_emb", c.pipeline.model.d_emb),
        INT_FIELD("model", "hidden", c.pipeline.model.hidden),

        FLOAT_FIELD("adam", "lr", c.pipeline.adam.lr),
        FLOAT_FIELD("adam", "beta1", c.pipeline.adam.beta1),
        FLOAT_FIELD("adam", "beta2", c.pipeline.adam.beta2),
        FLOAT_FIELD("adam", "eps", c.pipeline.adam.eps),

        FLOAT_FIELD("association", "lambda", c.pipeline.assoc.lambda),
        INT_FIELD("association", "k", c.pipeline.assoc.k),
        BOOL_FIELD("association", "use_str", c.pipeline.assoc.use_str),
        BOOL_FIELD("association", "use_kmeans", c.pipeline.assoc.use_kmeans),

        BOOL_FIELD("str", "squared_sigma", c.pipeline.assoc.squared_sigma),

        FLOAT_FIELD("pipeline", "margin", c.pipeline.margin),
        INT_FIELD("pipeline", "steps_s1", c.pipeline.steps_s1),
        INT_FIELD("pipeline", "steps_cross", c.pipeline.steps_cross),
        INT_FIELD("pipeline", "n_iterations", c.pipeline.n_iterations),
        BOOL_FIELD("pipeline", "progressive", c.pipeline.progressive),
        BOOL_FIELD("pipeline", "weakly_supervised", c.pipeline.weakly_supervised),
        SEED_FIELD("run", "seed", c.pipeline.seed),
        INT_FIELD("run", "threads", c.pipeline.threads),
    };
    return defs;
}

#undef INT_FIELD
#undef SEED_FIELD
#undef FLOAT_FIELD
#undef BOOL_FIELD

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Strips a trailing comment that starts outside the quoted region.
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

Value parse_value(const std::string& raw, int line_no) {
    const std::string text = trim(raw);
    if (text.empty()) {
        throw ConfigError("config line " + std::to_string(line_no) + ": missing value");
    }
    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"' ||
            text.find('"', 1) != text.size() - 1) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": malformed string literal");
        }
        return str_value(text.substr(1, text.size() - 2));
    }
    if (text == "true") return bool_value(true);
    if (text == "false") return bool_value(false);

    const bool looks_float = text.find_first_of(".eE") != std::string::npos &&
                             text.find("0x") != 0;
    try {
        std::size_t used = 0;
        if (looks_float) {
            const double f = std::stod(text, &used);
            if (used != text.size()) throw std::invalid_argument(text);
            return float_value(f);
        }
        const long long i = std::stoll(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return int_value(i);
    } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(line_no) + ": cannot parse value '" +
                          text + "'");
    }
}

const FieldDef* find_field(const std::string& section, const std::string& key) {
    for (const FieldDef& def : schema()) {
        if (section == def.section && key == def.key) return &def;
    }
    return nullptr;
}

std::string format_value(const Value& v) {
    switch (v.kind) {
        case Kind::Int:
            return std::to_string(v.i);
        case Kind::Float: {
            // Shortest representation that parses back to the same double.
            char buf[48];
            for (int prec = 1; prec <= 17; ++prec) {
                std::snprintf(buf, sizeof(buf), "%.*g", prec, v.f);
                if (std::strtod(buf, nullptr) == v.f) break;
            }
            return buf;
        }
        case Kind::Bool:
            return v.b ? "true" : "false";
        case Kind::Str:
            return "\"" + v.s + "\"";
    }
    return {};
}

}  // namespace

void Config::validate() const {
    sim.validate();
    pipeline.validate();
}

Config default_config() { return Config{}; }

Config parse_config(const std::string& text) {
    Config config = default_config();
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::set<std::string> seen;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const FieldDef& def : schema()) {
                if (section == def.section) {
                    known = true;
                    break;
                }
            }
            if (!known) {
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (section.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key +
                              "' precedes any [section]");
        }
        const FieldDef* def = find_field(section, key);
        if (def == nullptr) {
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key " +
                              section + "." + key);
        }
        const std::string full = section + "." + key;
        if (!seen.insert(full).second) {
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key " +
                              full);
        }
        def->set(config, parse_value(line.substr(eq + 1), line_no));
    }
    // The simulator topology always mirrors num_cameras and speed.
    config.sim.topology =
        default_topology(config.sim.num_cameras, config.sim.topology.speed_mps());
    return config;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string emit_config(const Config& config) {
    std::ostringstream out;
    std::string current;
    for (const FieldDef& def : schema()) {
        if (current != def.section) {
            if (!current.empty()) out << "\n";
            out << "[" << def.section << "]\n";
            current = def.section;
        }
        out << def.key << " = " << format_value(def.get(config)) << "\n";
    }
    return out.str();
}

std::uint64_t config_hash(const Config& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : emit_config(config)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace tastr
