#pragma once

#include "zoneliq/model.hpp"

#include <string>

namespace zoneliq {

// Parsed run configuration: the four top-level sections are all required;
// unknown keys anywhere are rejected.
struct RunConfig {
    ModelSpec model;
    CostSpec cost;
    GridSpec grid;
    RngSpec rng;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

// Canonical echo of the parsed config (sorted keys), and a 64-bit FNV-1a
// hash of it used as the problem identity in reports.
std::string canonical_config(const RunConfig& cfg);
std::string problem_hash(const RunConfig& cfg);

} // namespace zoneliq
