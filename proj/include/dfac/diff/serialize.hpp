#pragma once

#include "dfac/diff/graph.hpp"
#include "json.hpp"

namespace dfac::diff {

/// {"<name>": {"shape": [...], "values": [...]}, ...}
nlohmann::json params_to_json(const ParameterSet& set);
/// Overwrites every parameter of `set` from `j`. Missing names, extra names
/// and shape mismatches throw FormatError.
void params_from_json(const nlohmann::json& j, ParameterSet& set, const std::string& prefix = "");

}  // namespace dfac::diff
