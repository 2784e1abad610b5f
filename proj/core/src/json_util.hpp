// Internal JSON helpers shared by worldgen, config and the checkpoint code.
// Not installed; public headers stay free of the json dependency.
#pragma once

#include <json.hpp>

#include "cueplan/worldgen.hpp"

namespace cueplan {

nlohmann::json spec_to_json(const WorldSpec& spec);
WorldSpec spec_from_json(const nlohmann::json& j);

nlohmann::json vec2_to_json(Vec2 v);
Vec2 vec2_from_json(const nlohmann::json& j);

/// Canonical text form used for every JSON artifact: sorted keys (nlohmann
/// objects are std::map-backed), two-space indent, '\n' at EOF, shortest
/// round-trip doubles. Byte-stable across runs for equal values.
std::string canonical_dump(const nlohmann::json& j);

void write_text_file(const std::filesystem::path& file, const std::string& text);
nlohmann::json load_json_file(const std::filesystem::path& file);

}  // namespace cueplan
