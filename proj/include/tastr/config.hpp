#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "tastr/pipeline.hpp"
#include "tastr/simulator.hpp"

namespace tastr {

// Everything one experiment needs: world generation plus pipeline settings.
struct Config {
    SimConfig sim;
    PipelineConfig pipeline;

    void validate() const;
};

Config default_config();

// TOML subset: [section] headers, key = value lines with integer, float,
// boolean and double-quoted string values, # comments. Every key has a
// default; unknown or duplicate keys and type mismatches are ConfigErrors.
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);

// Canonical text with every key stated; parse_config(emit_config(c))
// round-trips and the text is stable for hashing.
std::string emit_config(const Config& config);

// FNV-1a over the canonical serialization.
std::uint64_t config_hash(const Config& config);

}  // namespace tastr
