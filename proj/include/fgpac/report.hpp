#pragma once

// JSON serialisation of certificates and Lipschitz estimates.

#include <filesystem>
#include <string>

#include "fgpac/bounds.hpp"
#include "fgpac/lipschitz.hpp"
#include "json.hpp"

namespace fgpac {

nlohmann::json to_json(const BoundReport& report);
BoundReport report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LipschitzEstimate& est);
LipschitzEstimate lipschitz_from_json(const nlohmann::json& j);

/// UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

/// Pretty-prints `j` to `path` (parent directories are created).
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace fgpac
