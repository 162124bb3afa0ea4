#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jttsl/drift_cal.hpp"
#include "jttsl/models.hpp"
#include "jttsl/network.hpp"

namespace jttsl {

enum class Variant { kJttsl, kCskfKnownDrift, kCentralized, kSingleSensor };

std::string to_string(Variant v);
/// Throws InvalidInputError for unknown names.
Variant variant_from_string(const std::string& name);
std::string to_string(DriftUpdateMode m);
DriftUpdateMode drift_mode_from_string(const std::string& name);
std::string to_string(SensorKind k);

struct SensorParams {
  SensorKind kind = SensorKind::kLinear;
  double alpha_min = 0.75;
  double alpha_max = 1.25;
  double sigma_y_m = 30.0;
  double sigma_r_m = 15.0;
  double sigma_beta_deg = 0.5;
  double sigma_beta_rad = 0.5 * 3.14159265358979323846 / 180.0;  // derived once at load
};

/// Full experiment description. Defaults mirror the shipped linear tree scenario.
struct Scenario {
  std::string topology_name = "tree9";  // preset name, or "custom" for an explicit edge list
  Topology topology = tree9();

  SensorParams sensors;

  double sigma_x_m = 10.0;
  double step_s = 1.0;

  int consensus_steps = 1;

  DriftUpdateMode mode = DriftUpdateMode::kGradientPerInterval;
  double stepsize = 1.2;
  double forgetting = 0.98;
  double rls_init_eps = 1e-6;
  Eigen::Vector2d initial_drift_m = Eigen::Vector2d::Zero();
  /// Seeds the estimators with the true drifts and discards their updates.
  bool freeze_drifts_at_truth = false;
  std::optional<double> gate_threshold;

  int horizon = 1000;
  int trials = 200;
  std::uint64_t seed = 1;
  std::vector<Variant> variants = {Variant::kJttsl, Variant::kCskfKnownDrift,
                                   Variant::kCentralized, Variant::kSingleSensor};

  Eigen::Vector4d target_initial_state{1000.0, 10.0, 1000.0, 5.0};
  double prior_sigma_position_m = 200.0;
  double prior_sigma_velocity_mps = 50.0;

  /// Throws ConfigError on inconsistent values.
  void validate() const;
};

/// Truth, sensor gains and measurements shared by every variant of a trial.
struct TrialData {
  std::uint64_t stream_id = 0;
  std::vector<Eigen::Vector4d> truth;               // global frame, one per step
  std::vector<double> alphas;                       // per node (linear sensors)
  std::vector<std::vector<Eigen::VectorXd>> measurements;  // [t][node], local frames
};

struct TrialResult {
  Variant variant = Variant::kJttsl;
  std::uint64_t stream_id = 0;
  /// [t][k]: per-node local-frame estimates (one global estimate for centralized).
  std::vector<std::vector<Eigen::Vector4d>> estimates;
  std::vector<std::vector<Eigen::Vector4d>> truths;
  /// Directed edges (i, j) with j in N^i \ {i}; populated for jttsl only.
  std::vector<Edge> drift_edges;
  /// Error before the first step, per drift edge: (xi, eta) of theta - theta_hat.
  std::vector<Eigen::Vector2d> initial_drift_errors;
  /// [t][edge]: (xi, eta) components of theta - theta_hat after step t.
  std::vector<std::vector<Eigen::Vector2d>> drift_errors;
};

struct RmseSeries {
  Variant variant = Variant::kJttsl;
  std::vector<double> rmse;  // position RMSE per step (m)
};

/// RNG engine for substream `stream` of trial `trial` under `seed`.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream);

std::vector<SensorModel> make_sensors(const Scenario& sc, std::span<const double> alphas);

/// x_{t+1} = A x_t + w_t from the scenario's initial state.
std::vector<Eigen::Vector4d> generate_truth(const Scenario& sc, std::mt19937_64& rng);

/// Node i observes h^i(g_t - pos_i) + v^i_t.
std::vector<std::vector<Eigen::VectorXd>> generate_measurements(
    std::span<const Eigen::Vector4d> truth, const Topology& t,
    std::span<const SensorModel> sensors, std::mt19937_64& rng, bool noiseless = false);

TrialData generate_trial_data(const Scenario& sc, std::uint64_t trial);

TrialResult run_trial(const Scenario& sc, Variant variant, const TrialData& data);
TrialResult run_trial(const Scenario& sc, Variant variant, std::uint64_t trial);

/// sqrt(mean over trials and estimates of the squared position error) per step.
RmseSeries rmse(std::span<const TrialResult> results);

/// Largest ||(xi_err, eta_err)|| over edges.
double max_edge_error(std::span<const Eigen::Vector2d> errors);

struct MonteCarloOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  /// Execution order of trial indices; empty means 0..trials-1.
  std::vector<std::uint64_t> order;
};

struct MonteCarloResult {
  std::vector<RmseSeries> rmse;
  std::vector<Edge> drift_edges;
  /// [trial] initial per-edge drift errors (jttsl only).
  std::vector<std::vector<Eigen::Vector2d>> initial_drift_errors;
  /// [trial][t][edge] drift errors (jttsl only).
  std::vector<std::vector<std::vector<Eigen::Vector2d>>> drift_errors;

  [[nodiscard]] const RmseSeries& series(Variant v) const;
  /// Median over trials of the max-edge drift error, per step.
  [[nodiscard]] std::vector<double> median_max_edge_error() const;
  /// Median over trials of the initial max-edge drift error.
  [[nodiscard]] double median_initial_max_edge_error() const;
};

MonteCarloResult monte_carlo(const Scenario& sc, const MonteCarloOptions& options = {});

}  // namespace jttsl
