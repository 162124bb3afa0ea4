#include "jttsl/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>

#include "jttsl/cskf.hpp"
#include "jttsl/errors.hpp"

namespace jttsl {

namespace {

Eigen::Vector4d frame_offset(const Position& p) { return {p.xi, 0.0, p.eta, 0.0}; }

GaussianMoment initial_prior(const Scenario& sc, const Eigen::Vector2d& position) {
  GaussianMoment g;
  g.mean = Eigen::Vector4d(position.x(), 0.0, position.y(), 0.0);
  const double sp = sc.prior_sigma_position_m * sc.prior_sigma_position_m;
  const double sv = sc.prior_sigma_velocity_mps * sc.prior_sigma_velocity_mps;
  g.cov = Eigen::Vector4d(sp, sv, sp, sv).asDiagonal();
  return g;
}

// Runs `fn`, re-raising library errors as NumericalError tagged with where
// in the filter loop they happened.
template <typename Fn>
auto annotated(NodeId node, int t, int round, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw NumericalError(std::string(e.what()) + " (node " + std::to_string(node) + ", t " +
                         std::to_string(t) + ", round " + std::to_string(round) + ")");
  }
}

/// SensorModel observing a global-frame state from a node at `offset`.
SensorModel shifted(const SensorModel& base, const Eigen::Vector4d& offset) {
  SensorModel s = base;
  s.measure = [m = base.measure, offset](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return m(x - offset);
  };
  s.jacobian = [j = base.jacobian, offset](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    return j(x - offset);
  };
  return s;
}

TrialResult run_centralized(const Scenario& sc, const TrialData& data) {
  const Topology& topo = sc.topology;
  const auto base = make_sensors(sc, data.alphas);
  const MotionModel motion = constant_velocity_model(sc.step_s, sc.sigma_x_m);

  std::vector<SensorModel> sensors;
  for (NodeId i = 1; i <= topo.node_count(); ++i) {
    sensors.push_back(shifted(base[i - 1], frame_offset(topo.position(i))));
  }

  TrialResult out;
  out.variant = Variant::kCentralized;
  out.stream_id = data.stream_id;
  NodeBelief belief;
  for (int t = 0; t < sc.horizon; ++t) {
    const auto& ys = data.measurements[t];
    if (t == 0) {
      const Position& p1 = topo.position(1);
      const Eigen::Vector2d local = base[0].position_from(ys[0]);
      belief = make_belief(initial_prior(sc, local + Eigen::Vector2d(p1.xi, p1.eta)));
    }
    belief = annotated(0, t, 0, [&] { return correct(belief, sensors, ys); });
    out.estimates.push_back({Eigen::Vector4d(belief.corrected.mean())});
    out.truths.push_back({data.truth[t]});
    belief = annotated(0, t, 0, [&] { return predict(belief, motion); });
  }
  return out;
}

TrialResult run_distributed(const Scenario& sc, Variant variant, const TrialData& data) {
  const Topology& topo = sc.topology;
  const int n = topo.node_count();
  const auto weights = metropolis_weights(topo);
  const auto known = true_drifts(topo);
  const auto sensors = make_sensors(sc, data.alphas);
  const MotionModel motion = constant_velocity_model(sc.step_s, sc.sigma_x_m);

  const bool estimate = variant == Variant::kJttsl;
  const int rounds = variant == Variant::kSingleSensor ? 0 : sc.consensus_steps;
  const bool per_round = sc.mode == DriftUpdateMode::kRlsPerRound;
  const bool gated = estimate && sc.gate_threshold.has_value();

  TrialResult out;
  out.variant = variant;
  out.stream_id = data.stream_id;

  std::vector<DriftEstimator> estimators;
  if (estimate) {
    Eigen::Vector4d init = Eigen::Vector4d::Zero();
    init(kXi) = sc.initial_drift_m.x();
    init(kEta) = sc.initial_drift_m.y();
    const auto seeds = sc.freeze_drifts_at_truth ? known : uniform_drifts(topo, init);
    for (NodeId i = 1; i <= n; ++i) {
      estimators.push_back(make_drift_estimator(seeds[i - 1], topo.neighbors_excluding_self(i),
                                                sc.forgetting, sc.stepsize, sc.mode,
                                                sc.rls_init_eps));
      for (NodeId j : topo.neighbors_excluding_self(i)) {
        out.drift_edges.push_back({i, j});
      }
    }
  }

  const auto drift_errors = [&] {
    std::vector<Eigen::Vector2d> errs;
    errs.reserve(out.drift_edges.size());
    for (const auto& e : out.drift_edges) {
      const Eigen::VectorXd diff =
          known[e.from - 1].at(e.to) - estimators[e.from - 1].drifts().at(e.to);
      errs.emplace_back(diff(kXi), diff(kEta));
    }
    return errs;
  };
  if (estimate) out.initial_drift_errors = drift_errors();

  std::vector<NodeBelief> beliefs(n);
  std::vector<bool> gate_open(n, !gated);

  for (int t = 0; t < sc.horizon; ++t) {
    const auto& ys = data.measurements[t];
    for (int k = 0; k < n; ++k) {
      annotated(k + 1, t, 0, [&] {
        if (t == 0) {
          beliefs[k] = make_belief(initial_prior(sc, sensors[k].position_from(ys[k])));
        }
        beliefs[k] = correct(beliefs[k], sensors[k], ys[k]);
      });
    }
    const std::vector<NodeBelief> local = gated ? beliefs : std::vector<NodeBelief>{};
    std::vector<double> loss_at_estimate(n, std::numeric_limits<double>::infinity());
    // Gradient mode: loss of the post-correction beliefs, stepped once after round L.
    std::vector<std::optional<LossQuadratic>> interval_loss(n);

    for (int l = 0; l < rounds; ++l) {
      const auto msgs = broadcast(beliefs, t);
      std::vector<NodeBelief> next(n);
      for (int k = 0; k < n; ++k) {
        const NodeId i = k + 1;
        next[k] = annotated(i, t, l, [&] {
          const auto box = inbox(msgs, topo, i);
          if (!estimate) {
            return consensus_step(beliefs[k], i, t, box, topo, weights, known[k]);
          }

          const bool calibrate = !box.empty() && (per_round || l == 0);
          LossQuadratic lq;
          if (calibrate) {
            std::vector<GaussianInfo> infos;
            infos.reserve(box.size());
            std::vector<MemberBelief> members{{i, &beliefs[k].corrected}};
            for (const auto& m : box) {
              infos.push_back({m.info_vec, m.info_mat});
            }
            for (std::size_t b = 0; b < box.size(); ++b) {
              members.push_back({box[b].sender, &infos[b]});
            }
            lq = loss_coefficients(stack_neighborhood(i, members, weights));
          }
          if (calibrate && per_round) {
            auto updated = rls_update(estimators[k], lq);
            if (!sc.freeze_drifts_at_truth) estimators[k] = std::move(updated);
            loss_at_estimate[k] = lq.evaluate(estimators[k].theta_hat);
          } else if (calibrate) {
            interval_loss[k] = std::move(lq);
          }
          auto fused = consensus_step(beliefs[k], i, t, box, topo, weights,
                                      estimators[k].drifts());
          if (!per_round && l == rounds - 1 && interval_loss[k]) {
            loss_at_estimate[k] = interval_loss[k]->evaluate(estimators[k].theta_hat);
            auto updated = gradient_step(estimators[k], *interval_loss[k]);
            if (!sc.freeze_drifts_at_truth) estimators[k] = std::move(updated);
          }
          return fused;
        });
      }
      beliefs = std::move(next);
    }

    if (gated) {
      for (int k = 0; k < n; ++k) {
        if (!gate_open[k] && loss_at_estimate[k] < *sc.gate_threshold) gate_open[k] = true;
        if (!gate_open[k]) beliefs[k].corrected = local[k].corrected;
      }
    }

    std::vector<Eigen::Vector4d> est(n);
    std::vector<Eigen::Vector4d> tru(n);
    for (int k = 0; k < n; ++k) {
      est[k] = annotated(k + 1, t, rounds, [&] { return Eigen::Vector4d(beliefs[k].corrected.mean()); });
      tru[k] = data.truth[t] - frame_offset(topo.position(k + 1));
    }
    out.estimates.push_back(std::move(est));
    out.truths.push_back(std::move(tru));
    if (estimate) out.drift_errors.push_back(drift_errors());

    for (int k = 0; k < n; ++k) {
      beliefs[k] = annotated(k + 1, t, rounds, [&] { return predict(beliefs[k], motion); });
    }
  }
  return out;
}

// Per-step squared position error summed over estimates, plus the count.
std::pair<std::vector<double>, std::size_t> squared_errors(const TrialResult& r) {
  std::vector<double> sums(r.estimates.size(), 0.0);
  std::size_t count = r.estimates.empty() ? 0 : r.estimates.front().size();
  for (std::size_t t = 0; t < r.estimates.size(); ++t) {
    if (r.estimates[t].size() != count) {
      throw InvalidInputError("rmse: estimate count changes over time");
    }
    for (std::size_t k = 0; k < count; ++k) {
      const Eigen::Vector4d d = r.estimates[t][k] - r.truths[t][k];
      sums[t] += d(kXi) * d(kXi) + d(kEta) * d(kEta);
    }
  }
  return {std::move(sums), count};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kJttsl:
      return "jttsl";
    case Variant::kCskfKnownDrift:
      return "cskf_known_drift";
    case Variant::kCentralized:
      return "centralized";
    case Variant::kSingleSensor:
      return "single_sensor";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& name) {
  for (Variant v : {Variant::kJttsl, Variant::kCskfKnownDrift, Variant::kCentralized,
                    Variant::kSingleSensor}) {
    if (to_string(v) == name) return v;
  }
  throw InvalidInputError("unknown variant '" + name + "'");
}

std::string to_string(DriftUpdateMode m) {
  return m == DriftUpdateMode::kRlsPerRound ? "rls_per_round" : "gradient_per_interval";
}

DriftUpdateMode drift_mode_from_string(const std::string& name) {
  if (name == "rls_per_round") return DriftUpdateMode::kRlsPerRound;
  if (name == "gradient_per_interval") return DriftUpdateMode::kGradientPerInterval;
  throw InvalidInputError("unknown drift update mode '" + name + "'");
}

std::string to_string(SensorKind k) {
  return k == SensorKind::kLinear ? "linear" : "range_bearing";
}

void Scenario::validate() const {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(horizon >= 1, "experiment.horizon_steps must be >= 1");
  require(trials >= 1, "experiment.trials must be >= 1");
  require(consensus_steps >= 1, "consensus.steps must be >= 1");
  require(step_s > 0.0, "motion.step_s must be positive");
  require(sigma_x_m >= 0.0, "motion.sigma_x_m must be non-negative");
  require(forgetting > 0.0 && forgetting < 1.0, "calibration.forgetting must lie in (0, 1)");
  require(stepsize > 0.0, "calibration.stepsize must be positive");
  require(rls_init_eps > 0.0, "calibration.rls_init_eps must be positive");
  require(prior_sigma_position_m > 0.0, "experiment.prior_sigma_position_m must be positive");
  require(prior_sigma_velocity_mps > 0.0,
          "experiment.prior_sigma_velocity_mps must be positive");
  require(!variants.empty(), "experiment.variants must not be empty");
  require(topology.is_symmetric(), "topology.edges must be symmetric");
  if (sensors.kind == SensorKind::kLinear) {
    require(sensors.sigma_y_m > 0.0, "sensors.sigma_y_m must be positive");
    require(sensors.alpha_min > 0.0 && sensors.alpha_min <= sensors.alpha_max,
            "sensors.alpha_min/alpha_max must satisfy 0 < min <= max");
  } else {
    require(sensors.sigma_r_m > 0.0, "sensors.sigma_r_m must be positive");
    require(sensors.sigma_beta_rad > 0.0, "sensors.sigma_beta_deg must be positive");
  }
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::vector<SensorModel> make_sensors(const Scenario& sc, std::span<const double> alphas) {
  std::vector<SensorModel> out;
  for (int k = 0; k < sc.topology.node_count(); ++k) {
    if (sc.sensors.kind == SensorKind::kLinear) {
      out.push_back(linear_sensor(alphas[k], sc.sensors.sigma_y_m));
    } else {
      out.push_back(range_bearing_sensor(sc.sensors.sigma_r_m, sc.sensors.sigma_beta_rad));
    }
  }
  return out;
}

std::vector<Eigen::Vector4d> generate_truth(const Scenario& sc, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  const Eigen::Matrix4d a = cv_matrix(sc.step_s);
  const double sigma = sc.sigma_x_m;
  std::vector<Eigen::Vector4d> traj;
  traj.reserve(sc.horizon);
  traj.push_back(sc.target_initial_state);
  for (int t = 1; t < sc.horizon; ++t) {
    Eigen::Vector4d w;
    for (int k = 0; k < kStateDim; ++k) w(k) = sigma * normal(rng);
    traj.push_back(a * traj.back() + w);
  }
  return traj;
}

std::vector<std::vector<Eigen::VectorXd>> generate_measurements(
    std::span<const Eigen::Vector4d> truth, const Topology& t,
    std::span<const SensorModel> sensors, std::mt19937_64& rng, bool noiseless) {
  std::normal_distribution<double> normal;
  std::vector<Eigen::MatrixXd> noise_factors;
  for (const auto& s : sensors) {
    noise_factors.push_back(checked_llt(s.meas_cov, "measurement covariance").matrixL());
  }
  std::vector<std::vector<Eigen::VectorXd>> out;
  out.reserve(truth.size());
  for (const auto& g : truth) {
    std::vector<Eigen::VectorXd> row;
    for (NodeId i = 1; i <= t.node_count(); ++i) {
      const SensorModel& s = sensors[i - 1];
      Eigen::VectorXd y = s.measure(g - frame_offset(t.position(i)));
      Eigen::VectorXd v(s.meas_dim());
      for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = normal(rng);
      if (!noiseless) y += noise_factors[i - 1] * v;
      if (s.kind == SensorKind::kRangeBearing) y(1) = wrap_angle(y(1));
      row.push_back(std::move(y));
    }
    out.push_back(std::move(row));
  }
  return out;
}

TrialData generate_trial_data(const Scenario& sc, std::uint64_t trial) {
  TrialData d;
  d.stream_id = trial;
  auto alpha_rng = make_stream(sc.seed, trial, 0);
  auto truth_rng = make_stream(sc.seed, trial, 1);
  auto meas_rng = make_stream(sc.seed, trial, 2);

  std::uniform_real_distribution<double> alpha(sc.sensors.alpha_min, sc.sensors.alpha_max);
  for (int k = 0; k < sc.topology.node_count(); ++k) {
    d.alphas.push_back(sc.sensors.alpha_min == sc.sensors.alpha_max ? sc.sensors.alpha_min
                                                                    : alpha(alpha_rng));
  }
  d.truth = generate_truth(sc, truth_rng);
  const auto sensors = make_sensors(sc, d.alphas);
  d.measurements = generate_measurements(d.truth, sc.topology, sensors, meas_rng);
  return d;
}

TrialResult run_trial(const Scenario& sc, Variant variant, const TrialData& data) {
  if (static_cast<int>(data.truth.size()) != sc.horizon ||
      static_cast<int>(data.measurements.size()) != sc.horizon) {
    throw InvalidInputError("run_trial: trial data does not match the scenario horizon");
  }
  if (variant == Variant::kCentralized) return run_centralized(sc, data);
  return run_distributed(sc, variant, data);
}

TrialResult run_trial(const Scenario& sc, Variant variant, std::uint64_t trial) {
  return run_trial(sc, variant, generate_trial_data(sc, trial));
}

RmseSeries rmse(std::span<const TrialResult> results) {
  if (results.empty()) {
    throw InvalidInputError("rmse: empty result set");
  }
  const std::size_t horizon = results.front().estimates.size();
  std::vector<double> sums(horizon, 0.0);
  std::size_t count = 0;
  for (const auto& r : results) {
    if (r.estimates.size() != horizon) {
      throw InvalidInputError("rmse: results have different horizons");
    }
    const auto [s, c] = squared_errors(r);
    for (std::size_t t = 0; t < horizon; ++t) sums[t] += s[t];
    count += c;
  }
  RmseSeries out;
  out.variant = results.front().variant;
  for (double s : sums) out.rmse.push_back(std::sqrt(s / static_cast<double>(count)));
  return out;
}

double max_edge_error(std::span<const Eigen::Vector2d> errors) {
  double m = 0.0;
  for (const auto& e : errors) m = std::max(m, e.norm());
  return m;
}

const RmseSeries& MonteCarloResult::series(Variant v) const {
  for (const auto& s : rmse) {
    if (s.variant == v) return s;
  }
  throw InvalidInputError("MonteCarloResult: no series for variant " + to_string(v));
}

std::vector<double> MonteCarloResult::median_max_edge_error() const {
  if (drift_errors.empty()) return {};
  const std::size_t horizon = drift_errors.front().size();
  std::vector<double> out(horizon);
  std::vector<double> per_trial(drift_errors.size());
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t k = 0; k < drift_errors.size(); ++k) {
      per_trial[k] = max_edge_error(drift_errors[k][t]);
    }
    out[t] = median(per_trial);
  }
  return out;
}

double MonteCarloResult::median_initial_max_edge_error() const {
  std::vector<double> v;
  for (const auto& e : initial_drift_errors) v.push_back(max_edge_error(e));
  return v.empty() ? 0.0 : median(std::move(v));
}

MonteCarloResult monte_carlo(const Scenario& sc, const MonteCarloOptions& options) {
  sc.validate();
  const auto trials = static_cast<std::size_t>(sc.trials);
  std::vector<std::uint64_t> order = options.order;
  if (order.empty()) {
    order.resize(trials);
    std::iota(order.begin(), order.end(), 0);
  }
  {
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      if (sorted[k] != k || sorted.size() != trials) {
        throw InvalidInputError("monte_carlo: execution order must permute 0..trials-1");
      }
    }
  }

  struct Slot {
    std::vector<std::pair<std::vector<double>, std::size_t>> errors;  // per variant
    std::vector<Edge> drift_edges;
    std::vector<Eigen::Vector2d> initial;
    std::vector<std::vector<Eigen::Vector2d>> drift;
  };
  std::vector<Slot> slots(trials);

  const auto work = [&](std::uint64_t trial) {
    const TrialData data = generate_trial_data(sc, trial);
    Slot& slot = slots[trial];
    for (Variant v : sc.variants) {
      TrialResult r = run_trial(sc, v, data);
      slot.errors.push_back(squared_errors(r));
      if (v == Variant::kJttsl) {
        slot.drift_edges = std::move(r.drift_edges);
        slot.initial = std::move(r.initial_drift_errors);
        slot.drift = std::move(r.drift_errors);
      }
    }
  };

  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                          : options.threads;
  threads = std::min<unsigned>(threads, static_cast<unsigned>(trials));
  if (threads <= 1) {
    for (auto trial : order) work(trial);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(threads);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t k = next++; k < order.size(); k = next++) work(order[k]);
        } catch (...) {
          failures[w] = std::current_exception();
          next = order.size();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
  }

  // Reduction runs in trial-index order so the result is independent of
  // execution order and thread count.
  MonteCarloResult out;
  const auto horizon = static_cast<std::size_t>(sc.horizon);
  for (std::size_t v = 0; v < sc.variants.size(); ++v) {
    std::vector<double> sums(horizon, 0.0);
    std::size_t count = 0;
    for (const auto& slot : slots) {
      for (std::size_t t = 0; t < horizon; ++t) sums[t] += slot.errors[v].first[t];
      count += slot.errors[v].second;
    }
    RmseSeries series{sc.variants[v], {}};
    for (double s : sums) series.rmse.push_back(std::sqrt(s / static_cast<double>(count)));
    out.rmse.push_back(std::move(series));
  }
  for (auto& slot : slots) {
    if (slot.drift.empty()) continue;
    out.drift_edges = slot.drift_edges;
    out.initial_drift_errors.push_back(std::move(slot.initial));
    out.drift_errors.push_back(std::move(slot.drift));
  }
  return out;
}

}  // namespace jttsl
