#pragma once

#include "thintube/harness.hpp"

#include <optional>
#include <string>

namespace thintube {

/// One study document: the StudyConfig plus an optional subcommand name.
///
/// Layout (every key optional, unknown keys rejected):
///   command: string
///   geometry: {curvature, torsion, rotation, profile: string, unbounded: bool, a, b: number}
///   section: {shape, radius, center: [x, y], x_range, y_range: [lo, hi],
///             vertices: [[x, y], ...], n: int}
///   eps: [number, ...], j_max: int, boundary: "dirichlet" | "neumann",
///   n: int, delta: number,
///   window: {cap, start, growth},
///   tube3d: {n_s, section_n, coarse_n_s, coarse_section_n, spread_limit},
///   output: {csv, json: string}
struct RunConfig {
  std::optional<std::string> command;
  StudyConfig study;
};

/// Throws ConfigError naming the offending key on malformed input.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Inverse of parse_config.
std::string config_json(const RunConfig& config);

}  // namespace thintube
