#pragma once

#include "rasa/experiments.hpp"
#include "rasa/network.hpp"
#include "rasa/oracle.hpp"
#include "rasa/problem.hpp"
#include "rasa/sa_engine.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace rasa {

using Json = nlohmann::json;

// Matrices travel as flat row-major arrays next to explicit dimensions.
// Malformed documents raise ConfigError naming the offending field.

Json to_json(const ProblemSpec& problem);
/// {n, m, agents:[{Q, c, set:{kind, ...}, d}]}; certifies every set.
ProblemSpec problem_from_json(const Json& j);

Json to_json(const GraphModel& model);
/// {n, kind, graphs, p_lo, p_hi, pool_size}; gossip/broadcast carry an
/// optional `base` adjacency.
GraphModel graph_model_from_json(const Json& j);

Json to_json(const OracleSolution& sol);
OracleSolution oracle_solution_from_json(const Json& j, int n, int m);

Json to_json(const NoiseConfig& noise);
NoiseConfig noise_from_json(const Json& j);

Json to_json(const StepSchedule& schedule);
StepSchedule schedule_from_json(const Json& j);

Json to_json(const KktReport& report);
Json to_json(const ValidationReport& report);

/// {dist|obj|consensus|balance|state_norm:{mean,median,p90}}; null when no values.
Json final_metric_summary(const std::vector<Metrics>& finals);

/// {paths, diverged, diverged_paths, final:{dist|obj|consensus|balance|state_norm:{mean,median,p90}}}
Json monte_carlo_summary(const MonteCarloResult& mc);

/// bin_lo,bin_hi,count
std::string histogram_to_csv(const std::vector<HistogramBin>& bins);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it into place.
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace rasa
