#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "bsda/model.hpp"
#include "bsda/synth.hpp"

namespace bsda {

using Json = nlohmann::ordered_json;

Json to_json(const BsdaConfig& config);
Json to_json(const SynthConfig& config);

/// Keys absent from `j` keep their defaults. Unknown keys, wrong types and
/// invalid values throw ConfigInvalid.
BsdaConfig bsda_config_from_json(const Json& j);
SynthConfig synth_config_from_json(const Json& j);

/// Throws IoError if unreadable and ConfigInvalid if not a JSON object.
Json read_json_file(const std::filesystem::path& path);
/// Two-space indented, trailing newline.
std::string dump_json(const Json& j);

}  // namespace bsda
