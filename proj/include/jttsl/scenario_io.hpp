#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "jttsl/simulator.hpp"

namespace jttsl {

inline constexpr const char* kVersion = "0.3.0";

/**
 * Scenario files are YAML documents with six sections:
 *
 *   motion:       sigma_x_m, step_s
 *   sensors:      kind (linear | range_bearing)
 *                   linear:        sigma_y_m, [alpha_min], [alpha_max]
 *                   range_bearing: sigma_r_m, sigma_beta_deg
 *   topology:     preset (tree9 | cycle9 | single)
 *                 or positions_m [[xi, eta], ...] plus links [[i, j], ...]
 *   consensus:    steps
 *   calibration:  stepsize, [mode], [forgetting], [rls_init_eps],
 *                 [initial_drift_m], [gate_threshold], [freeze_at_truth]
 *   experiment:   horizon_steps, trials, seed, [variants],
 *                 [target_initial_position_m], [target_initial_velocity_mps],
 *                 [prior_sigma_position_m], [prior_sigma_velocity_mps]
 *
 * Bracketed keys are optional. Unknown keys are rejected. Errors are
 * ConfigError with the offending key path.
 */
Scenario parse_scenario(const std::filesystem::path& path);
Scenario parse_scenario_text(const std::string& text);

/// Re-parseable scenario text with every resolved value written out.
std::string emit_scenario(const Scenario& sc);

/// Command-line values that take precedence over the scenario file.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> consensus_steps;
  std::vector<Variant> variants;
  std::optional<double> gate_threshold;
};

void apply_overrides(Scenario& sc, const RunOverrides& ov);

/// Columns: t, variant, rmse_m.
void write_rmse_csv(std::ostream& os, const MonteCarloResult& r);
/// Columns: trial, t, edge_i, edge_j, xi_err_m, eta_err_m.
void write_drift_csv(std::ostream& os, const MonteCarloResult& r);
/// Deterministic JSON: resolved scenario, overrides, seed and versions.
std::string run_summary(const Scenario& sc, const RunOverrides& ov);

/**
 * Writes rmse.csv, drift_errors.csv, summary.json and resolved.scenario to
 * `dir`, plus timing.json with the wall time. Throws ConfigError if the
 * directory cannot be created or written.
 */
void write_bundle(const std::filesystem::path& dir, const Scenario& sc, const RunOverrides& ov,
                  const MonteCarloResult& r, double wall_time_s);

}  // namespace jttsl
