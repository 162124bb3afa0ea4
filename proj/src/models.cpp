#include "jttsl/models.hpp"

#include <cmath>
#include <numbers>

#include "jttsl/errors.hpp"
#include "jttsl/gaussian_info.hpp"

namespace jttsl {

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, kTwoPi);
  if (r > std::numbers::pi) {
    r -= kTwoPi;
  } else if (r <= -std::numbers::pi) {
    r += kTwoPi;
  }
  return r;
}

Eigen::Matrix4d cv_matrix(double step_s) {
  Eigen::Matrix4d a = Eigen::Matrix4d::Identity();
  a(kXi, kXiDot) = step_s;
  a(kEta, kEtaDot) = step_s;
  return a;
}

TargetState cv_transition(const TargetState& x, double step_s) {
  return cv_matrix(step_s) * x;
}

Eigen::Vector2d linear_measure(const TargetState& x, double alpha) {
  return alpha * Eigen::Vector2d(x(kXi), x(kEta));
}

Eigen::Vector2d range_bearing_measure(const TargetState& x) {
  const double xi = x(kXi);
  const double eta = x(kEta);
  if (xi == 0.0 && eta == 0.0) {
    throw InvalidInputError("range_bearing_measure: target at sensor origin");
  }
  // atan2 returns [-pi, pi]; map -pi onto pi.
  return {std::hypot(xi, eta), wrap_angle(std::atan2(eta, xi))};
}

Eigen::Matrix<double, 2, 4> range_bearing_jacobian(const TargetState& x) {
  const double xi = x(kXi);
  const double eta = x(kEta);
  const double r = std::hypot(xi, eta);
  if (!(r > kRangeFloor)) {
    throw InvalidInputError("range_bearing_jacobian: range below singularity floor");
  }
  const double r2 = r * r;
  Eigen::Matrix<double, 2, 4> c = Eigen::Matrix<double, 2, 4>::Zero();
  c(0, kXi) = xi / r;
  c(0, kEta) = eta / r;
  c(1, kXi) = -eta / r2;
  c(1, kEta) = xi / r2;
  return c;
}

MotionModel linear_motion_model(const Eigen::MatrixXd& transition_matrix,
                                const Eigen::MatrixXd& process_cov, double step_s) {
  MotionModel m;
  m.transition = [a = transition_matrix](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return a * x;
  };
  m.jacobian = [a = transition_matrix](const Eigen::VectorXd&) -> Eigen::MatrixXd { return a; };
  m.process_cov = process_cov;
  m.process_info = spd_inverse(process_cov, "process covariance");
  m.step_s = step_s;
  return m;
}

MotionModel constant_velocity_model(double step_s, double sigma_x) {
  if (!(step_s > 0.0)) {
    throw InvalidInputError("constant_velocity_model: step must be positive");
  }
  return linear_motion_model(cv_matrix(step_s),
                             sigma_x * sigma_x * Eigen::MatrixXd::Identity(kStateDim, kStateDim),
                             step_s);
}

SensorModel linear_sensor(const Eigen::MatrixXd& c, const Eigen::MatrixXd& meas_cov) {
  SensorModel s;
  s.kind = SensorKind::kLinear;
  s.measure = [c](const Eigen::VectorXd& x) -> Eigen::VectorXd { return c * x; };
  s.jacobian = [c](const Eigen::VectorXd&) -> Eigen::MatrixXd { return c; };
  s.meas_cov = meas_cov;
  s.meas_info = spd_inverse(meas_cov, "measurement covariance");
  return s;
}

SensorModel linear_sensor(double alpha, double sigma_y) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, kStateDim);
  c(0, kXi) = alpha;
  c(1, kEta) = alpha;
  SensorModel s = linear_sensor(c, sigma_y * sigma_y * Eigen::MatrixXd::Identity(2, 2));
  s.gain = alpha;
  return s;
}

SensorModel range_bearing_sensor(double sigma_r, double sigma_beta_rad) {
  SensorModel s;
  s.kind = SensorKind::kRangeBearing;
  s.measure = [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return range_bearing_measure(TargetState(x));
  };
  s.jacobian = [](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    return range_bearing_jacobian(TargetState(x));
  };
  s.meas_cov = Eigen::Vector2d(sigma_r * sigma_r, sigma_beta_rad * sigma_beta_rad).asDiagonal();
  s.meas_info = spd_inverse(s.meas_cov, "measurement covariance");
  return s;
}

Eigen::VectorXd SensorModel::innovation(const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& predicted) const {
  Eigen::VectorXd r = y - predicted;
  if (kind == SensorKind::kRangeBearing) {
    r(1) = wrap_angle(r(1));
  }
  return r;
}

Eigen::Vector2d SensorModel::position_from(const Eigen::VectorXd& y) const {
  if (kind == SensorKind::kRangeBearing) {
    return {y(0) * std::cos(y(1)), y(0) * std::sin(y(1))};
  }
  return y.head<2>() / gain;
}

}  // namespace jttsl
