#pragma once

#include <functional>

#include <Eigen/Core>

namespace jttsl {

// Target state ordering: [xi, xi_dot, eta, eta_dot] (m, m/s, m, m/s).
using TargetState = Eigen::Vector4d;

inline constexpr int kStateDim = 4;
inline constexpr int kXi = 0;
inline constexpr int kXiDot = 1;
inline constexpr int kEta = 2;
inline constexpr int kEtaDot = 3;

/// Ranges below this are treated as the range-bearing singularity (m).
inline constexpr double kRangeFloor = 1e-6;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

TargetState cv_transition(const TargetState& x, double step_s);
Eigen::Matrix4d cv_matrix(double step_s);

Eigen::Vector2d linear_measure(const TargetState& x, double alpha);
/// Range and full-quadrant bearing. Throws InvalidInputError at the origin.
Eigen::Vector2d range_bearing_measure(const TargetState& x);
/// 2x4 Jacobian of range_bearing_measure. Throws below kRangeFloor.
Eigen::Matrix<double, 2, 4> range_bearing_jacobian(const TargetState& x);

/// Motion model x_{t+1} = f(x_t) + w_t with w_t ~ N(0, process_cov).
struct MotionModel {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> transition;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
  Eigen::MatrixXd process_cov;
  Eigen::MatrixXd process_info;
  double step_s = 1.0;

  [[nodiscard]] Eigen::Index dim() const { return process_cov.rows(); }
};

/// Constant-velocity model with Q = sigma_x^2 * I4.
MotionModel constant_velocity_model(double step_s, double sigma_x);

/// Builds a model from an arbitrary (possibly low-dimensional) linear map.
MotionModel linear_motion_model(const Eigen::MatrixXd& transition_matrix,
                                const Eigen::MatrixXd& process_cov, double step_s = 1.0);

enum class SensorKind { kLinear, kRangeBearing };

/// Measurement model y = h(x) + v with v ~ N(0, meas_cov).
struct SensorModel {
  SensorKind kind = SensorKind::kLinear;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> measure;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
  Eigen::MatrixXd meas_cov;
  Eigen::MatrixXd meas_info;
  double gain = 1.0;  // alpha^i, linear sensors only

  [[nodiscard]] Eigen::Index meas_dim() const { return meas_cov.rows(); }
  /// y - h(x) with the bearing component wrapped for range-bearing sensors.
  [[nodiscard]] Eigen::VectorXd innovation(const Eigen::VectorXd& y,
                                           const Eigen::VectorXd& predicted) const;
  /// Position (xi, eta) implied by a single measurement, used for initialization.
  [[nodiscard]] Eigen::Vector2d position_from(const Eigen::VectorXd& y) const;
};

/// h(x) = alpha * [xi, eta], R = sigma_y^2 * I2.
SensorModel linear_sensor(double alpha, double sigma_y);
/// h(x) = [range, bearing], R = diag(sigma_r^2, sigma_beta^2); sigma_beta in radians.
SensorModel range_bearing_sensor(double sigma_r, double sigma_beta_rad);
/// Generic linear sensor y = C x + v for low-dimensional stand-ins.
SensorModel linear_sensor(const Eigen::MatrixXd& c, const Eigen::MatrixXd& meas_cov);

}  // namespace jttsl
