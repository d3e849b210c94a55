#pragma once

// Conditional probability paths between the data point (t = 0) and the
// standard-normal prior (t = 1), with their target vector fields.
//
//   OT:  x_t = (s + (1 - s) t) x1 + (1 - t) x0,     u = (1 - s) x1 - x0
//   VP:  x_t = a(t) x0 + sqrt(1 - a(t)^2) eps,      u = a'(t) (x0 - a(t) x) / (1 - a(t)^2)
//   EOT: the OT path with x1 replaced by its equivariant-OT alignment onto x0.
//
// The VP field is the time derivative of the VP flow at fixed eps, expressed
// through x. Time runs from data (0) to noise (1), so a'(t) < 0.

#include "equifm/alignment.hpp"
#include "equifm/molecule.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace equifm {

class PathError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Smallest t accepted by the VP target field; 1 - a(t)^2 vanishes at t = 0.
inline constexpr double kVpMinTime = 1e-5;

enum class ScheduleKind { Linear, Cosine, Polynomial };

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(const std::string& name);

/// a(t) = exp(-T(t) / 2) for the linear beta schedule; cosine and polynomial
/// schedules are given directly in terms of a(t).
class NoiseSchedule {
 public:
  static NoiseSchedule linear(double beta_min = 0.1, double beta_max = 20.0);
  static NoiseSchedule cosine(double offset = 0.008);
  static NoiseSchedule polynomial(double precision = 1e-5);
  static NoiseSchedule of_kind(ScheduleKind kind);

  ScheduleKind kind() const { return kind_; }
  double alpha(double t) const;
  double alpha_prime(double t) const;
  /// a^2 / (1 - a^2); rejects t = 0 where it is infinite.
  double snr(double t) const;

  double beta_min() const { return p0_; }
  double beta_max() const { return p1_; }
  double cosine_offset() const { return p0_; }
  double precision() const { return p0_; }

 private:
  NoiseSchedule(ScheduleKind kind, double p0, double p1) : kind_(kind), p0_(p0), p1_(p1) {}
  ScheduleKind kind_;
  double p0_;
  double p1_;
};

enum class PathKind { OT, VP, EOT };

std::string to_string(PathKind kind);
PathKind parse_path_kind(const std::string& name);

struct ConditionalPath {
  PathKind kind = PathKind::OT;
  double sigma_min = 1e-4;
  NoiseSchedule schedule = NoiseSchedule::linear();

  static ConditionalPath ot(double sigma_min = 1e-4) { return {PathKind::OT, sigma_min, NoiseSchedule::linear()}; }
  static ConditionalPath eot(double sigma_min = 1e-4) { return {PathKind::EOT, sigma_min, NoiseSchedule::linear()}; }
  static ConditionalPath vp(NoiseSchedule s) { return {PathKind::VP, 1e-4, s}; }

  void validate() const;
  /// Mean coefficient on the data point and standard deviation of the noise at t.
  double signal_scale(double t) const;
  double noise_scale(double t) const;
};

/// Independent paths for the coordinates and the node features.
struct HybridPath {
  ConditionalPath path_x = ConditionalPath::eot();
  ConditionalPath path_h = ConditionalPath::vp(NoiseSchedule::linear());

  void validate() const;
};

Eigen::MatrixXd ot_interpolate(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x0, double t, double sigma_min);
Eigen::MatrixXd ot_target_field(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x0, double sigma_min);

Eigen::MatrixXd vp_sample(const Eigen::MatrixXd& x0, double t, const NoiseSchedule& s, const Eigen::MatrixXd& eps);
Eigen::MatrixXd vp_target_field(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x0, double t,
                                const NoiseSchedule& s);

struct EotPair {
  PointCloud x_t;
  PointCloud u_x;
};

/// x1 is the prior draw, x0 the data coordinates, plan solves z = x1 onto y = x0.
EotPair eot_training_pair(const PointCloud& x1, const PointCloud& x0, double t, double sigma_min,
                          const EotPlan& plan);

struct TrainingSample {
  MoleculeGeometry g_t;
  Eigen::MatrixXd u_x;
  Eigen::MatrixXd u_h;
  double t = 0.0;
  /// Iterations of the winning EOT start; 0 when path_x is not EOT.
  int eot_iterations = 0;
};

/// Builds (g_t, u_x, u_h) from explicit noise. eps_x is projected to Zero-CoM
/// here; `rng` only drives EOT restarts.
TrainingSample hybrid_training_sample_from_noise(const MoleculeGeometry& g0, double t, const HybridPath& hp,
                                                 const PointCloud& eps_x, const Eigen::MatrixXd& eps_h,
                                                 const EotOptions& eot, Rng& rng);

/// Draws eps_x then eps_h from `rng`, then defers to the explicit-noise form.
TrainingSample hybrid_training_sample(const MoleculeGeometry& g0, double t, const HybridPath& hp,
                                      const EotOptions& eot, Rng& rng);

}  // namespace equifm
