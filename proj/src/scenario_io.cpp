#include "jttsl/scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "jttsl/errors.hpp"

namespace jttsl {

namespace {

const std::vector<std::string> kSections = {"motion",    "sensors",     "topology",
                                            "consensus", "calibration", "experiment"};

// Wraps a YAML map and remembers which keys were read so leftovers can be
// rejected as unknown.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (!node_.IsMap()) throw ConfigError(path_ + ": expected a mapping");
  }

  [[nodiscard]] bool has(const std::string& key) const { return bool(node_[key]); }

  template <typename T>
  T get(const std::string& key) {
    used_.insert(key);
    const YAML::Node v = node_[key];
    if (!v) throw ConfigError(path_ + "." + key + ": missing required key");
    return convert<T>(v, key);
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    used_.insert(key);
    const YAML::Node v = node_[key];
    return v ? convert<T>(v, key) : fallback;
  }

  YAML::Node raw(const std::string& key) {
    used_.insert(key);
    return node_[key];
  }

  [[nodiscard]] std::string key_path(const std::string& key) const { return path_ + "." + key; }

  void reject_unknown() const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.contains(key)) throw ConfigError(key_path(key) + ": unknown key");
    }
  }

 private:
  template <typename T>
  T convert(const YAML::Node& v, const std::string& key) const {
    try {
      return v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(key_path(key) + ": invalid value '" + YAML::Dump(v) + "'");
    }
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

Eigen::Vector2d pair_value(Section& s, const std::string& key, const Eigen::Vector2d& fallback) {
  if (!s.has(key)) {
    s.raw(key);
    return fallback;
  }
  const auto v = s.get<std::vector<double>>(key);
  if (v.size() != 2) throw ConfigError(s.key_path(key) + ": expected two numbers");
  return {v[0], v[1]};
}

void require_positive(const Section& s, const std::string& key, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(s.key_path(key) + ": must be a positive finite number");
  }
}

Topology parse_topology(Section& s, std::string& name) {
  if (s.has("preset")) {
    name = s.get<std::string>("preset");
    if (s.has("positions_m") || s.has("links")) {
      throw ConfigError(s.key_path("preset") + ": cannot be combined with positions_m/links");
    }
    try {
      return topology_preset(name);
    } catch (const InvalidInputError& e) {
      throw ConfigError(s.key_path("preset") + ": " + e.what());
    }
  }
  name = "custom";
  const auto raw_positions = s.get<std::vector<std::vector<double>>>("positions_m");
  const auto raw_links = s.get_or<std::vector<std::vector<int>>>("links", {});
  std::vector<Position> positions;
  for (const auto& p : raw_positions) {
    if (p.size() != 2) throw ConfigError(s.key_path("positions_m") + ": expected [xi, eta]");
    positions.push_back({p[0], p[1]});
  }
  std::vector<std::pair<NodeId, NodeId>> links;
  for (const auto& l : raw_links) {
    if (l.size() != 2) throw ConfigError(s.key_path("links") + ": expected [i, j]");
    links.emplace_back(l[0], l[1]);
  }
  try {
    return Topology::undirected(static_cast<int>(positions.size()), links, positions);
  } catch (const InvalidInputError& e) {
    throw ConfigError(s.key_path("links") + ": " + e.what());
  }
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("scenario: YAML syntax error: ") + e.what());
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError("scenario: top level must be a mapping");
  for (const auto& name : kSections) {
    if (!root[name]) throw ConfigError(name + ": missing required section");
  }
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (std::find(kSections.begin(), kSections.end(), key) == kSections.end()) {
      throw ConfigError(key + ": unknown section");
    }
  }

  Scenario sc;

  Section motion(root["motion"], "motion");
  sc.sigma_x_m = motion.get<double>("sigma_x_m");
  if (!(sc.sigma_x_m >= 0.0)) throw ConfigError("motion.sigma_x_m: must be non-negative");
  sc.step_s = motion.get<double>("step_s");
  require_positive(motion, "step_s", sc.step_s);
  motion.reject_unknown();

  Section sensors(root["sensors"], "sensors");
  const auto kind = sensors.get<std::string>("kind");
  if (kind == "linear") {
    sc.sensors.kind = SensorKind::kLinear;
    sc.sensors.sigma_y_m = sensors.get<double>("sigma_y_m");
    require_positive(sensors, "sigma_y_m", sc.sensors.sigma_y_m);
    sc.sensors.alpha_min = sensors.get_or<double>("alpha_min", sc.sensors.alpha_min);
    sc.sensors.alpha_max = sensors.get_or<double>("alpha_max", sc.sensors.alpha_max);
    require_positive(sensors, "alpha_min", sc.sensors.alpha_min);
    if (sc.sensors.alpha_max < sc.sensors.alpha_min) {
      throw ConfigError("sensors.alpha_max: must not be below alpha_min");
    }
  } else if (kind == "range_bearing") {
    sc.sensors.kind = SensorKind::kRangeBearing;
    sc.sensors.sigma_r_m = sensors.get<double>("sigma_r_m");
    require_positive(sensors, "sigma_r_m", sc.sensors.sigma_r_m);
    sc.sensors.sigma_beta_deg = sensors.get<double>("sigma_beta_deg");
    require_positive(sensors, "sigma_beta_deg", sc.sensors.sigma_beta_deg);
  } else {
    throw ConfigError("sensors.kind: expected 'linear' or 'range_bearing', got '" + kind + "'");
  }
  sc.sensors.sigma_beta_rad = sc.sensors.sigma_beta_deg * std::numbers::pi / 180.0;
  sensors.reject_unknown();

  Section topology(root["topology"], "topology");
  sc.topology = parse_topology(topology, sc.topology_name);
  topology.reject_unknown();

  Section consensus(root["consensus"], "consensus");
  sc.consensus_steps = consensus.get<int>("steps");
  if (sc.consensus_steps < 1) throw ConfigError("consensus.steps: must be >= 1");
  consensus.reject_unknown();

  Section calibration(root["calibration"], "calibration");
  sc.stepsize = calibration.get<double>("stepsize");
  require_positive(calibration, "stepsize", sc.stepsize);
  try {
    sc.mode = drift_mode_from_string(
        calibration.get_or<std::string>("mode", to_string(sc.mode)));
  } catch (const InvalidInputError& e) {
    throw ConfigError(std::string("calibration.mode: ") + e.what());
  }
  sc.forgetting = calibration.get_or<double>("forgetting", sc.forgetting);
  if (!(sc.forgetting > 0.0 && sc.forgetting < 1.0)) {
    throw ConfigError("calibration.forgetting: must lie in (0, 1)");
  }
  sc.rls_init_eps = calibration.get_or<double>("rls_init_eps", sc.rls_init_eps);
  require_positive(calibration, "rls_init_eps", sc.rls_init_eps);
  sc.initial_drift_m = pair_value(calibration, "initial_drift_m", sc.initial_drift_m);
  sc.freeze_drifts_at_truth = calibration.get_or<bool>("freeze_at_truth", false);
  if (calibration.has("gate_threshold")) {
    const auto gate = calibration.get<std::string>("gate_threshold");
    if (gate != "off") {
      sc.gate_threshold = calibration.get<double>("gate_threshold");
      require_positive(calibration, "gate_threshold", *sc.gate_threshold);
    }
  } else {
    calibration.raw("gate_threshold");
  }
  calibration.reject_unknown();

  Section experiment(root["experiment"], "experiment");
  sc.horizon = experiment.get<int>("horizon_steps");
  if (sc.horizon < 1) throw ConfigError("experiment.horizon_steps: must be >= 1");
  sc.trials = experiment.get<int>("trials");
  if (sc.trials < 1) throw ConfigError("experiment.trials: must be >= 1");
  sc.seed = experiment.get<std::uint64_t>("seed");
  if (experiment.has("variants")) {
    sc.variants.clear();
    for (const auto& name : experiment.get<std::vector<std::string>>("variants")) {
      try {
        sc.variants.push_back(variant_from_string(name));
      } catch (const InvalidInputError& e) {
        throw ConfigError(std::string("experiment.variants: ") + e.what());
      }
    }
    if (sc.variants.empty()) throw ConfigError("experiment.variants: must not be empty");
  } else {
    experiment.raw("variants");
  }
  const Eigen::Vector2d pos = pair_value(experiment, "target_initial_position_m",
                                         {sc.target_initial_state(kXi), sc.target_initial_state(kEta)});
  const Eigen::Vector2d vel =
      pair_value(experiment, "target_initial_velocity_mps",
                 {sc.target_initial_state(kXiDot), sc.target_initial_state(kEtaDot)});
  sc.target_initial_state = Eigen::Vector4d(pos.x(), vel.x(), pos.y(), vel.y());
  sc.prior_sigma_position_m =
      experiment.get_or<double>("prior_sigma_position_m", sc.prior_sigma_position_m);
  require_positive(experiment, "prior_sigma_position_m", sc.prior_sigma_position_m);
  sc.prior_sigma_velocity_mps =
      experiment.get_or<double>("prior_sigma_velocity_mps", sc.prior_sigma_velocity_mps);
  require_positive(experiment, "prior_sigma_velocity_mps", sc.prior_sigma_velocity_mps);
  experiment.reject_unknown();

  sc.validate();
  return sc;
}

Scenario parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scenario: cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

std::string emit_scenario(const Scenario& sc) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;

  out << YAML::Key << "motion" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "sigma_x_m" << YAML::Value << sc.sigma_x_m;
  out << YAML::Key << "step_s" << YAML::Value << sc.step_s;
  out << YAML::EndMap;

  out << YAML::Key << "sensors" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << to_string(sc.sensors.kind);
  if (sc.sensors.kind == SensorKind::kLinear) {
    out << YAML::Key << "sigma_y_m" << YAML::Value << sc.sensors.sigma_y_m;
    out << YAML::Key << "alpha_min" << YAML::Value << sc.sensors.alpha_min;
    out << YAML::Key << "alpha_max" << YAML::Value << sc.sensors.alpha_max;
  } else {
    out << YAML::Key << "sigma_r_m" << YAML::Value << sc.sensors.sigma_r_m;
    out << YAML::Key << "sigma_beta_deg" << YAML::Value << sc.sensors.sigma_beta_deg;
  }
  out << YAML::EndMap;

  out << YAML::Key << "topology" << YAML::Value << YAML::BeginMap;
  if (sc.topology_name != "custom") {
    out << YAML::Key << "preset" << YAML::Value << sc.topology_name;
  } else {
    out << YAML::Key << "positions_m" << YAML::Value << YAML::BeginSeq;
    for (const auto& p : sc.topology.positions()) {
      out << YAML::Flow << std::vector<double>{p.xi, p.eta};
    }
    out << YAML::EndSeq;
    out << YAML::Key << "links" << YAML::Value << YAML::BeginSeq;
    for (const auto& e : sc.topology.edges()) {
      if (e.from < e.to) out << YAML::Flow << std::vector<int>{e.from, e.to};
    }
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;

  out << YAML::Key << "consensus" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "steps" << YAML::Value << sc.consensus_steps;
  out << YAML::EndMap;

  out << YAML::Key << "calibration" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mode" << YAML::Value << to_string(sc.mode);
  out << YAML::Key << "stepsize" << YAML::Value << sc.stepsize;
  out << YAML::Key << "forgetting" << YAML::Value << sc.forgetting;
  out << YAML::Key << "rls_init_eps" << YAML::Value << sc.rls_init_eps;
  out << YAML::Key << "initial_drift_m" << YAML::Value << YAML::Flow
      << std::vector<double>{sc.initial_drift_m.x(), sc.initial_drift_m.y()};
  out << YAML::Key << "freeze_at_truth" << YAML::Value << sc.freeze_drifts_at_truth;
  out << YAML::Key << "gate_threshold" << YAML::Value;
  if (sc.gate_threshold) {
    out << *sc.gate_threshold;
  } else {
    out << "off";
  }
  out << YAML::EndMap;

  out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "horizon_steps" << YAML::Value << sc.horizon;
  out << YAML::Key << "trials" << YAML::Value << sc.trials;
  out << YAML::Key << "seed" << YAML::Value << sc.seed;
  out << YAML::Key << "variants" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (Variant v : sc.variants) out << to_string(v);
  out << YAML::EndSeq;
  const auto& x0 = sc.target_initial_state;
  out << YAML::Key << "target_initial_position_m" << YAML::Value << YAML::Flow
      << std::vector<double>{x0(kXi), x0(kEta)};
  out << YAML::Key << "target_initial_velocity_mps" << YAML::Value << YAML::Flow
      << std::vector<double>{x0(kXiDot), x0(kEtaDot)};
  out << YAML::Key << "prior_sigma_position_m" << YAML::Value << sc.prior_sigma_position_m;
  out << YAML::Key << "prior_sigma_velocity_mps" << YAML::Value << sc.prior_sigma_velocity_mps;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void apply_overrides(Scenario& sc, const RunOverrides& ov) {
  if (ov.seed) sc.seed = *ov.seed;
  if (ov.trials) sc.trials = *ov.trials;
  if (ov.consensus_steps) sc.consensus_steps = *ov.consensus_steps;
  if (!ov.variants.empty()) sc.variants = ov.variants;
  if (ov.gate_threshold) sc.gate_threshold = *ov.gate_threshold;
  sc.validate();
}

void write_rmse_csv(std::ostream& os, const MonteCarloResult& r) {
  os << "t,variant,rmse_m\n";
  for (const auto& s : r.rmse) {
    for (std::size_t t = 0; t < s.rmse.size(); ++t) {
      os << t << ',' << to_string(s.variant) << ',' << num(s.rmse[t]) << '\n';
    }
  }
}

void write_drift_csv(std::ostream& os, const MonteCarloResult& r) {
  os << "trial,t,edge_i,edge_j,xi_err_m,eta_err_m\n";
  for (std::size_t trial = 0; trial < r.drift_errors.size(); ++trial) {
    const auto& series = r.drift_errors[trial];
    for (std::size_t t = 0; t < series.size(); ++t) {
      for (std::size_t e = 0; e < r.drift_edges.size(); ++e) {
        os << trial << ',' << t << ',' << r.drift_edges[e].from << ',' << r.drift_edges[e].to
           << ',' << num(series[t][e].x()) << ',' << num(series[t][e].y()) << '\n';
      }
    }
  }
}

std::string run_summary(const Scenario& sc, const RunOverrides& ov) {
  nlohmann::ordered_json j;
  j["tool"] = "jttsl";
  j["version"] = kVersion;
  j["versions"] = {{"jttsl", kVersion},
                   {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                                         EIGEN_MINOR_VERSION)}};
  j["seed"] = sc.seed;
  j["trials"] = sc.trials;

  nlohmann::ordered_json s;
  s["topology"] = sc.topology_name;
  s["node_count"] = sc.topology.node_count();
  nlohmann::ordered_json positions = nlohmann::ordered_json::array();
  for (const auto& p : sc.topology.positions()) positions.push_back({p.xi, p.eta});
  s["positions_m"] = positions;
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (const auto& e : sc.topology.edges()) edges.push_back({e.from, e.to});
  s["edges"] = edges;
  s["sensor_kind"] = to_string(sc.sensors.kind);
  if (sc.sensors.kind == SensorKind::kLinear) {
    s["sigma_y_m"] = sc.sensors.sigma_y_m;
    s["alpha_min"] = sc.sensors.alpha_min;
    s["alpha_max"] = sc.sensors.alpha_max;
  } else {
    s["sigma_r_m"] = sc.sensors.sigma_r_m;
    s["sigma_beta_deg"] = sc.sensors.sigma_beta_deg;
    s["sigma_beta_rad"] = sc.sensors.sigma_beta_rad;
  }
  s["sigma_x_m"] = sc.sigma_x_m;
  s["step_s"] = sc.step_s;
  s["consensus_steps"] = sc.consensus_steps;
  s["consensus_weights"] = "metropolis_1_plus_max_degree";
  s["drift_update_mode"] = to_string(sc.mode);
  s["stepsize"] = sc.stepsize;
  s["forgetting"] = sc.forgetting;
  s["rls_init_eps"] = sc.rls_init_eps;
  s["initial_drift_m"] = {sc.initial_drift_m.x(), sc.initial_drift_m.y()};
  s["freeze_at_truth"] = sc.freeze_drifts_at_truth;
  s["gate_threshold"] = sc.gate_threshold ? nlohmann::ordered_json(*sc.gate_threshold)
                                          : nlohmann::ordered_json("off");
  s["horizon_steps"] = sc.horizon;
  s["trials"] = sc.trials;
  s["seed"] = sc.seed;
  nlohmann::ordered_json variants = nlohmann::ordered_json::array();
  for (Variant v : sc.variants) variants.push_back(to_string(v));
  s["variants"] = variants;
  const auto& x0 = sc.target_initial_state;
  s["target_initial_state"] = {x0(0), x0(1), x0(2), x0(3)};
  s["prior_sigma_position_m"] = sc.prior_sigma_position_m;
  s["prior_sigma_velocity_mps"] = sc.prior_sigma_velocity_mps;
  j["scenario"] = s;

  nlohmann::ordered_json o = nlohmann::ordered_json::object();
  if (ov.seed) o["seed"] = *ov.seed;
  if (ov.trials) o["trials"] = *ov.trials;
  if (ov.consensus_steps) o["consensus_steps"] = *ov.consensus_steps;
  if (!ov.variants.empty()) {
    nlohmann::ordered_json names = nlohmann::ordered_json::array();
    for (Variant v : ov.variants) names.push_back(to_string(v));
    o["variants"] = names;
  }
  if (ov.gate_threshold) o["gate_threshold"] = *ov.gate_threshold;
  j["overrides"] = o;
  j["outputs"] = {"rmse.csv", "drift_errors.csv", "resolved.scenario"};
  return j.dump(2) + "\n";
}

void write_bundle(const std::filesystem::path& dir, const Scenario& sc, const RunOverrides& ov,
                  const MonteCarloResult& r, double wall_time_s) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("--out: cannot create " + dir.string() + ": " + ec.message());

  const auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw ConfigError("--out: cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("rmse.csv");
    write_rmse_csv(f, r);
  }
  {
    auto f = open("drift_errors.csv");
    write_drift_csv(f, r);
  }
  {
    auto f = open("summary.json");
    f << run_summary(sc, ov);
  }
  {
    auto f = open("resolved.scenario");
    f << emit_scenario(sc);
  }
  {
    auto f = open("timing.json");
    f << nlohmann::json{{"wall_time_s", wall_time_s}}.dump(2) << "\n";
  }
}

}  // namespace jttsl
