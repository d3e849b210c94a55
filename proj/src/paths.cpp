#include "equifm/paths.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace equifm {

namespace {

void check_time(double t, const char* what) {
  if (!(t >= 0.0 && t <= 1.0)) throw PathError(std::string(what) + ": t = " + std::to_string(t) + " is outside [0, 1]");
}

void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw PathError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

}  // namespace

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Linear: return "linear";
    case ScheduleKind::Cosine: return "cosine";
    case ScheduleKind::Polynomial: return "polynomial";
  }
  return "?";
}

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "linear") return ScheduleKind::Linear;
  if (name == "cosine") return ScheduleKind::Cosine;
  if (name == "polynomial") return ScheduleKind::Polynomial;
  throw PathError("unknown noise schedule '" + name + "' (expected linear, cosine or polynomial)");
}

NoiseSchedule NoiseSchedule::linear(double beta_min, double beta_max) {
  if (!(beta_min > 0.0 && beta_max > beta_min)) throw PathError("linear schedule needs 0 < beta_min < beta_max");
  return {ScheduleKind::Linear, beta_min, beta_max};
}

NoiseSchedule NoiseSchedule::cosine(double offset) {
  if (!(offset > 0.0 && offset < 0.5)) throw PathError("cosine schedule offset must lie in (0, 0.5)");
  return {ScheduleKind::Cosine, offset, 0.0};
}

NoiseSchedule NoiseSchedule::polynomial(double precision) {
  if (!(precision > 0.0 && precision < 0.1)) throw PathError("polynomial schedule precision must lie in (0, 0.1)");
  return {ScheduleKind::Polynomial, precision, 0.0};
}

NoiseSchedule NoiseSchedule::of_kind(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Linear: return linear();
    case ScheduleKind::Cosine: return cosine();
    case ScheduleKind::Polynomial: return polynomial();
  }
  return linear();
}

double NoiseSchedule::alpha(double t) const {
  check_time(t, "alpha");
  switch (kind_) {
    case ScheduleKind::Linear: {
      const double integral = p0_ * t + 0.5 * (p1_ - p0_) * t * t;
      return std::exp(-0.5 * integral);
    }
    case ScheduleKind::Cosine: {
      const double angle = 0.5 * std::numbers::pi * (t + p0_) / (1.0 + p0_);
      return std::clamp(std::cos(angle), 0.0, 1.0);
    }
    case ScheduleKind::Polynomial: return p0_ + (1.0 - 2.0 * p0_) * (1.0 - t * t);
  }
  return 0.0;
}

double NoiseSchedule::alpha_prime(double t) const {
  check_time(t, "alpha_prime");
  switch (kind_) {
    case ScheduleKind::Linear: {
      const double beta = p0_ + t * (p1_ - p0_);
      return -0.5 * beta * alpha(t);
    }
    case ScheduleKind::Cosine: {
      const double rate = 0.5 * std::numbers::pi / (1.0 + p0_);
      return -rate * std::sin(rate * (t + p0_));
    }
    case ScheduleKind::Polynomial: return -2.0 * t * (1.0 - 2.0 * p0_);
  }
  return 0.0;
}

double NoiseSchedule::snr(double t) const {
  check_time(t, "snr");
  if (t == 0.0) throw PathError("snr: infinite at t = 0");
  const double a2 = alpha(t) * alpha(t);
  return a2 / (1.0 - a2);
}

std::string to_string(PathKind kind) {
  switch (kind) {
    case PathKind::OT: return "ot";
    case PathKind::VP: return "vp";
    case PathKind::EOT: return "eot";
  }
  return "?";
}

PathKind parse_path_kind(const std::string& name) {
  if (name == "ot" || name == "OT") return PathKind::OT;
  if (name == "vp" || name == "VP") return PathKind::VP;
  if (name == "eot" || name == "EOT") return PathKind::EOT;
  throw PathError("unknown path kind '" + name + "' (expected ot, vp or eot)");
}

void ConditionalPath::validate() const {
  if (kind != PathKind::VP && !(sigma_min > 0.0 && sigma_min <= 0.1))
    throw PathError("sigma_min must lie in (0, 0.1], got " + std::to_string(sigma_min));
}

double ConditionalPath::signal_scale(double t) const {
  return kind == PathKind::VP ? schedule.alpha(t) : 1.0 - t;
}

double ConditionalPath::noise_scale(double t) const {
  if (kind == PathKind::VP) {
    const double a = schedule.alpha(t);
    return std::sqrt(std::max(0.0, 1.0 - a * a));
  }
  return sigma_min + (1.0 - sigma_min) * t;
}

void HybridPath::validate() const {
  path_x.validate();
  path_h.validate();
  if (path_h.kind == PathKind::EOT) throw PathError("the EOT path applies to coordinates only");
}

Eigen::MatrixXd ot_interpolate(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x0, double t, double sigma_min) {
  check_same_shape(x1, x0, "ot_interpolate");
  check_time(t, "ot_interpolate");
  return (sigma_min + (1.0 - sigma_min) * t) * x1 + (1.0 - t) * x0;
}

Eigen::MatrixXd ot_target_field(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x0, double sigma_min) {
  check_same_shape(x1, x0, "ot_target_field");
  return (1.0 - sigma_min) * x1 - x0;
}

Eigen::MatrixXd vp_sample(const Eigen::MatrixXd& x0, double t, const NoiseSchedule& s, const Eigen::MatrixXd& eps) {
  check_same_shape(x0, eps, "vp_sample");
  const double a = s.alpha(t);
  return a * x0 + std::sqrt(std::max(0.0, 1.0 - a * a)) * eps;
}

Eigen::MatrixXd vp_target_field(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x0, double t,
                                const NoiseSchedule& s) {
  check_same_shape(x, x0, "vp_target_field");
  check_time(t, "vp_target_field");
  if (t < kVpMinTime)
    throw PathError("vp_target_field: t = " + std::to_string(t) + " is below the guard " + std::to_string(kVpMinTime));
  const double a = s.alpha(t);
  const double coeff = s.alpha_prime(t) / (1.0 - a * a);
  return coeff * (x0 - a * x);
}

EotPair eot_training_pair(const PointCloud& x1, const PointCloud& x0, double t, double sigma_min,
                          const EotPlan& plan) {
  if (plan.permutation.size() != x1.rows() || x1.rows() != x0.rows())
    throw PathError("eot_training_pair: plan covers " + std::to_string(plan.permutation.size()) + " points, clouds have " +
                    std::to_string(x1.rows()) + " and " + std::to_string(x0.rows()));
  check_time(t, "eot_training_pair");
  const PointCloud aligned = apply(x1, plan.rotation, plan.permutation);
  EotPair out;
  out.x_t = (sigma_min + (1.0 - sigma_min) * t) * aligned + (1.0 - t) * x0;
  out.u_x = (1.0 - sigma_min) * aligned - x0;
  project_zero_com_inplace(out.u_x);
  return out;
}

TrainingSample hybrid_training_sample_from_noise(const MoleculeGeometry& g0, double t, const HybridPath& hp,
                                                 const PointCloud& eps_x, const Eigen::MatrixXd& eps_h,
                                                 const EotOptions& eot, Rng& rng) {
  check_time(t, "hybrid_training_sample");
  hp.validate();
  if (eps_x.rows() != g0.n_nodes() || eps_h.rows() != g0.n_nodes() || eps_h.cols() != g0.feature_dim())
    throw PathError("hybrid_training_sample: noise shape does not match the geometry");

  TrainingSample out;
  out.t = t;
  const PointCloud x1 = project_zero_com(eps_x);
  const PointCloud& x0 = g0.coords;

  switch (hp.path_x.kind) {
    case PathKind::EOT: {
      const EotPlan plan = solve_eot(x1, x0, eot, rng);
      EotPair pair = eot_training_pair(x1, x0, t, hp.path_x.sigma_min, plan);
      out.g_t.coords = std::move(pair.x_t);
      out.u_x = std::move(pair.u_x);
      out.eot_iterations = plan.iterations;
      break;
    }
    case PathKind::OT:
      out.g_t.coords = ot_interpolate(x1, x0, t, hp.path_x.sigma_min);
      out.u_x = ot_target_field(x1, x0, hp.path_x.sigma_min);
      break;
    case PathKind::VP:
      out.g_t.coords = vp_sample(x0, t, hp.path_x.schedule, x1);
      out.u_x = vp_target_field(out.g_t.coords, x0, t, hp.path_x.schedule);
      break;
  }
  project_zero_com_inplace(out.g_t.coords);
  project_zero_com_inplace(out.u_x);

  const Eigen::MatrixXd& h0 = g0.features;
  if (hp.path_h.kind == PathKind::VP) {
    out.g_t.features = vp_sample(h0, t, hp.path_h.schedule, eps_h);
    out.u_h = vp_target_field(out.g_t.features, h0, t, hp.path_h.schedule);
  } else {
    out.g_t.features = ot_interpolate(eps_h, h0, t, hp.path_h.sigma_min);
    out.u_h = ot_target_field(eps_h, h0, hp.path_h.sigma_min);
  }
  return out;
}

TrainingSample hybrid_training_sample(const MoleculeGeometry& g0, double t, const HybridPath& hp,
                                      const EotOptions& eot, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  PointCloud eps_x(g0.n_nodes(), 3);
  for (int i = 0; i < eps_x.rows(); ++i)
    for (int k = 0; k < 3; ++k) eps_x(i, k) = normal(rng);
  Eigen::MatrixXd eps_h(g0.n_nodes(), g0.feature_dim());
  for (int i = 0; i < eps_h.rows(); ++i)
    for (int k = 0; k < eps_h.cols(); ++k) eps_h(i, k) = normal(rng);
  return hybrid_training_sample_from_noise(g0, t, hp, eps_x, eps_h, eot, rng);
}

}  // namespace equifm
