#include "jttsl/simulator.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "jttsl/errors.hpp"

namespace jttsl {
namespace {

Scenario small_scenario(int horizon = 60, int trials = 3) {
  Scenario sc;
  sc.horizon = horizon;
  sc.trials = trials;
  sc.seed = 5;
  return sc;
}

void expect_identical(const TrialResult& a, const TrialResult& b) {
  ASSERT_EQ(a.estimates.size(), b.estimates.size());
  for (std::size_t t = 0; t < a.estimates.size(); ++t) {
    ASSERT_EQ(a.estimates[t].size(), b.estimates[t].size());
    for (std::size_t k = 0; k < a.estimates[t].size(); ++k) {
      ASSERT_EQ(a.estimates[t][k], b.estimates[t][k]) << "t " << t << " node " << k + 1;
    }
  }
}

TEST(GenerateTruth, NoiselessIsExactConstantVelocity) {
  Scenario sc = small_scenario(50);
  sc.sigma_x_m = 0.0;
  auto rng = make_stream(1, 0, 1);
  const auto traj = generate_truth(sc, rng);
  ASSERT_EQ(traj.size(), 50u);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Vector4d expected(1000.0 + 10.0 * t, 10.0, 1000.0 + 5.0 * t, 5.0);
    EXPECT_LT((traj[static_cast<std::size_t>(t)] - expected).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(GenerateTruth, SameSeedSameTrajectory) {
  const Scenario sc = small_scenario(200);
  auto a = make_stream(9, 3, 1);
  auto b = make_stream(9, 3, 1);
  EXPECT_EQ(generate_truth(sc, a), generate_truth(sc, b));
  auto c = make_stream(9, 4, 1);
  EXPECT_NE(generate_truth(sc, a), generate_truth(sc, c));
}

TEST(GenerateTruth, ProcessNoiseCovariance) {
  Scenario sc = small_scenario(100001);
  auto rng = make_stream(2, 0, 1);
  const auto traj = generate_truth(sc, rng);
  const Eigen::Matrix4d a = cv_matrix(1.0);
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  const double n = 100000.0;
  for (std::size_t t = 0; t + 1 < traj.size(); ++t) mean += (traj[t + 1] - a * traj[t]) / n;
  for (std::size_t t = 0; t + 1 < traj.size(); ++t) {
    const Eigen::Vector4d w = traj[t + 1] - a * traj[t] - mean;
    cov += w * w.transpose() / (n - 1.0);
  }
  for (int r = 0; r < 4; ++r) {
    EXPECT_NEAR(cov(r, r), 100.0, 5.0);
    for (int c = 0; c < 4; ++c)
      if (r != c) EXPECT_LT(std::abs(cov(r, c)), 5.0);
  }
}

TEST(GenerateMeasurements, Examples) {
  const std::vector<Eigen::Vector4d> truth{{3, 1, 4, 1}};
  auto rng = make_stream(1, 0, 2);
  const Topology origin = single_node();
  const std::vector<SensorModel> unit{linear_sensor(1.0, 30.0)};
  EXPECT_EQ(generate_measurements(truth, origin, unit, rng, true)[0][0], Eigen::VectorXd(Eigen::Vector2d(3, 4)));

  const Topology shifted(1, {}, {{3, 4}});
  EXPECT_EQ(generate_measurements(truth, shifted, unit, rng, true)[0][0],
            Eigen::VectorXd(Eigen::Vector2d(0, 0)));

  const Topology twins = Topology::undirected(2, {{1, 2}}, {{7, -2}, {7, -2}});
  const std::vector<SensorModel> both{linear_sensor(0.9, 30.0), linear_sensor(0.9, 30.0)};
  const auto ys = generate_measurements(truth, twins, both, rng, true);
  EXPECT_EQ(ys[0][0], ys[0][1]);
}

TEST(GenerateMeasurements, RangeBearingSingularity) {
  const std::vector<Eigen::Vector4d> truth{{3, 0, 4, 0}};
  auto rng = make_stream(1, 0, 2);
  const Topology on_target(1, {}, {{3, 4}});
  const std::vector<SensorModel> rb{range_bearing_sensor(15.0, 0.01)};
  EXPECT_THROW(generate_measurements(truth, on_target, rb, rng), InvalidInputError);
}

TEST(GenerateMeasurements, NoiseCovariance) {
  const std::vector<Eigen::Vector4d> truth(100000, Eigen::Vector4d(100, 0, 200, 0));
  auto rng = make_stream(4, 0, 2);
  const std::vector<SensorModel> s{linear_sensor(1.0, 30.0)};
  const auto ys = generate_measurements(truth, single_node(), s, rng);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& row : ys) {
    const Eigen::Vector2d v = row[0] - Eigen::Vector2d(100, 200);
    cov += v * v.transpose() / 100000.0;
  }
  EXPECT_NEAR(cov(0, 0), 900.0, 45.0);
  EXPECT_NEAR(cov(1, 1), 900.0, 45.0);
  EXPECT_LT(std::abs(cov(0, 1)), 45.0);
}

TEST(GenerateTrialData, AlphasWithinRange) {
  const Scenario sc = small_scenario(10);
  const TrialData d = generate_trial_data(sc, 0);
  ASSERT_EQ(d.alphas.size(), 9u);
  for (double a : d.alphas) {
    EXPECT_GE(a, 0.75);
    EXPECT_LE(a, 1.25);
  }
  EXPECT_EQ(generate_trial_data(sc, 0).measurements, d.measurements);
}

TEST(RunTrial, FrozenTrueDriftsEqualKnownDrift) {
  for (const std::string preset : {"tree9", "cycle9"}) {
    Scenario sc = small_scenario(100);
    sc.topology = topology_preset(preset);
    sc.consensus_steps = 3;
    sc.freeze_drifts_at_truth = true;
    for (auto mode : {DriftUpdateMode::kGradientPerInterval, DriftUpdateMode::kRlsPerRound}) {
      sc.mode = mode;
      const TrialData data = generate_trial_data(sc, 1);
      expect_identical(run_trial(sc, Variant::kJttsl, data),
                       run_trial(sc, Variant::kCskfKnownDrift, data));
    }
  }
}

TEST(RunTrial, SingleNodeJttslEqualsSingleSensor) {
  Scenario sc = small_scenario(100);
  sc.topology = single_node();
  sc.topology_name = "single";
  for (auto kind : {SensorKind::kLinear, SensorKind::kRangeBearing}) {
    sc.sensors.kind = kind;
    const TrialData data = generate_trial_data(sc, 0);
    expect_identical(run_trial(sc, Variant::kJttsl, data),
                     run_trial(sc, Variant::kSingleSensor, data));
  }
}

TEST(RunTrial, NoiselessStationaryTargetTrackedExactly) {
  Scenario sc = small_scenario(100);
  sc.sigma_x_m = 10.0;  // the filters still assume process noise
  sc.target_initial_state = Eigen::Vector4d(1000, 0, 1000, 0);
  sc.freeze_drifts_at_truth = true;
  sc.consensus_steps = 2;

  Scenario truth_sc = sc;
  truth_sc.sigma_x_m = 0.0;
  TrialData data;
  data.alphas = std::vector<double>(9, 0.9);
  auto rng = make_stream(1, 0, 1);
  data.truth = generate_truth(truth_sc, rng);
  const auto sensors = make_sensors(sc, data.alphas);
  data.measurements = generate_measurements(data.truth, sc.topology, sensors, rng, true);

  for (Variant v : sc.variants) {
    const TrialResult r = run_trial(sc, v, data);
    for (std::size_t t = 0; t < r.estimates.size(); ++t) {
      for (std::size_t k = 0; k < r.estimates[t].size(); ++k) {
        const Eigen::Vector4d err = r.estimates[t][k] - r.truths[t][k];
        ASSERT_LT(err.cwiseAbs().maxCoeff(), 1e-9) << to_string(v) << " t " << t;
      }
    }
  }
}

TEST(RunTrial, DriftErrorVelocityComponentsZeroAndEdgesComplete) {
  Scenario sc = small_scenario(20);
  const TrialResult r = run_trial(sc, Variant::kJttsl, std::uint64_t{0});
  EXPECT_EQ(r.drift_edges.size(), 16u);
  ASSERT_EQ(r.drift_errors.size(), 20u);
  // Zero initial estimates: initial error equals the true drift.
  const auto known = true_drifts(sc.topology);
  for (std::size_t e = 0; e < r.drift_edges.size(); ++e) {
    const auto& edge = r.drift_edges[e];
    const Eigen::VectorXd theta = known[edge.from - 1].at(edge.to);
    EXPECT_EQ(r.initial_drift_errors[e], Eigen::Vector2d(theta(kXi), theta(kEta)));
  }
}

TEST(Rmse, Examples) {
  TrialResult zero;
  zero.estimates = {{Eigen::Vector4d::Zero()}};
  zero.truths = {{Eigen::Vector4d::Zero()}};
  EXPECT_EQ(rmse(std::vector{zero}).rmse, std::vector<double>{0.0});

  TrialResult off = zero;
  off.estimates = {{Eigen::Vector4d(3, 100, 4, -7)}};
  EXPECT_DOUBLE_EQ(rmse(std::vector{off}).rmse[0], 5.0);
  EXPECT_DOUBLE_EQ(rmse(std::vector{zero, off}).rmse[0], std::sqrt(25.0 / 2.0));

  EXPECT_THROW(rmse(std::vector<TrialResult>{}), InvalidInputError);
}

TEST(MonteCarlo, SingleTrialReducesToRunTrial) {
  Scenario sc = small_scenario(40, 1);
  const auto mc = monte_carlo(sc, {1, {}});
  for (Variant v : sc.variants) {
    const TrialResult r = run_trial(sc, v, std::uint64_t{0});
    EXPECT_EQ(mc.series(v).rmse, rmse(std::vector{r}).rmse) << to_string(v);
  }
  const TrialResult j = run_trial(sc, Variant::kJttsl, std::uint64_t{0});
  EXPECT_EQ(mc.drift_errors.front(), j.drift_errors);
}

TEST(MonteCarlo, OrderAndThreadCountDoNotChangeResults) {
  Scenario sc = small_scenario(40, 6);
  const auto reference = monte_carlo(sc, {1, {}});
  const auto permuted = monte_carlo(sc, {1, {5, 2, 0, 4, 1, 3}});
  const auto threaded = monte_carlo(sc, {3, {3, 1, 4, 0, 5, 2}});
  for (Variant v : sc.variants) {
    EXPECT_EQ(reference.series(v).rmse, permuted.series(v).rmse);
    EXPECT_EQ(reference.series(v).rmse, threaded.series(v).rmse);
  }
  EXPECT_EQ(reference.drift_errors, permuted.drift_errors);
  EXPECT_EQ(reference.drift_errors, threaded.drift_errors);
  EXPECT_THROW(monte_carlo(sc, {1, {0, 1, 2}}), InvalidInputError);
}

TEST(MonteCarlo, DoublingTrialsHalvesVariance) {
  const auto variance_at_end = [](int trials) {
    std::vector<double> samples;
    for (std::uint64_t rep = 0; rep < 400; ++rep) {
      Scenario sc = small_scenario(10, trials);
      sc.variants = {Variant::kSingleSensor};
      sc.seed = 1000 + rep;
      samples.push_back(monte_carlo(sc, {1, {}}).series(Variant::kSingleSensor).rmse.back());
    }
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    return var / static_cast<double>(samples.size() - 1);
  };
  const double ratio = variance_at_end(8) / variance_at_end(4);
  EXPECT_GT(ratio, 0.25);
  EXPECT_LT(ratio, 0.75);
}

TEST(Scenario, Validation) {
  Scenario sc;
  EXPECT_NO_THROW(sc.validate());
  sc.consensus_steps = 0;
  EXPECT_THROW(sc.validate(), ConfigError);
  sc = Scenario{};
  sc.trials = 0;
  EXPECT_THROW(sc.validate(), ConfigError);
  sc = Scenario{};
  sc.horizon = 0;
  EXPECT_THROW(sc.validate(), ConfigError);
}

TEST(VariantNames, RoundTrip) {
  for (Variant v : {Variant::kJttsl, Variant::kCskfKnownDrift, Variant::kCentralized,
                    Variant::kSingleSensor}) {
    EXPECT_EQ(variant_from_string(to_string(v)), v);
  }
  EXPECT_THROW(variant_from_string("kalman"), InvalidInputError);
}

}  // namespace
}  // namespace jttsl
