#pragma once

#include <json.hpp>

#include <string>

#include "fracvis/analysis.hpp"
#include "fracvis/grid.hpp"
#include "fracvis/montecarlo.hpp"
#include "fracvis/visibility.hpp"

namespace fracvis {

using Json = nlohmann::ordered_json;

// All file schemas carry {"format": 1, "type": ...} and reject anything
// else, so stale files fail loudly instead of half-parsing.

Json tree_to_json(const PercolationTree& tree);
// Rebuilds from explicit levels when present (validated square by
// square), otherwise regenerates from the embedded parameters.
PercolationTree tree_from_json(const Json& j);

Json sight_to_json(const SightSpec& sight);
SightSpec sight_from_json(const Json& j);

Json cover_to_json(const VisibleCover& cover);
VisibleCover cover_from_json(const Json& j);

Json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const Json& j);

Json report_to_json(const ExperimentReport& report);

std::string scaling_csv(const ScalingTable& table);
std::string stripe_csv(const LengthEstimate& est);

std::string dump_json(const Json& j);
void write_json_file(const std::string& path, const Json& j);
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace fracvis
