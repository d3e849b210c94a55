#include "equifm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace equifm {

std::string to_string(IntegratorMethod m) {
  switch (m) {
    case IntegratorMethod::Euler: return "euler";
    case IntegratorMethod::Midpoint: return "midpoint";
    case IntegratorMethod::Rk4: return "rk4";
    case IntegratorMethod::Dopri5: return "dopri5";
  }
  return "unknown";
}

IntegratorMethod parse_integrator(const std::string& name) {
  if (name == "euler") return IntegratorMethod::Euler;
  if (name == "midpoint") return IntegratorMethod::Midpoint;
  if (name == "rk4") return IntegratorMethod::Rk4;
  if (name == "dopri5") return IntegratorMethod::Dopri5;
  throw SamplingError("unknown integrator '" + name + "' (expected euler, midpoint, rk4 or dopri5)");
}

IntegratorSpec IntegratorSpec::for_method(IntegratorMethod m) {
  IntegratorSpec s;
  s.method = m;
  s.n_steps = m == IntegratorMethod::Rk4 ? 50 : 100;
  return s;
}

void IntegratorSpec::validate() const {
  if (method != IntegratorMethod::Dopri5) {
    if (n_steps < 1) throw SamplingError("n_steps must be at least 1");
    return;
  }
  if (!(rtol > 0.0) || !(atol > 0.0)) throw SamplingError("rtol and atol must be positive");
  if (max_nfe < 7) throw SamplingError("max_nfe is too small for a single dopri5 step");
  if (!(initial_step > 0.0 && initial_step <= 1.0)) throw SamplingError("initial_step must lie in (0, 1]");
  if (!(safety > 0.0 && safety <= 1.0)) throw SamplingError("safety must lie in (0, 1]");
  if (!(min_factor > 0.0 && min_factor < 1.0 && max_factor > 1.0))
    throw SamplingError("step factor bounds must satisfy 0 < min < 1 < max");
}

int nfe_bin(double t) {
  const int b = static_cast<int>(std::floor(t * kNfeBins));
  return std::clamp(b, 0, kNfeBins - 1);
}

Eigen::VectorXd step_euler(const OdeField& f, const Eigen::VectorXd& y, double t, double dt, long& nfe) {
  Eigen::VectorXd k(y.size());
  f(t, y, k);
  ++nfe;
  return y + dt * k;
}

Eigen::VectorXd step_midpoint(const OdeField& f, const Eigen::VectorXd& y, double t, double dt, long& nfe) {
  Eigen::VectorXd k1(y.size()), k2(y.size());
  f(t, y, k1);
  f(t + 0.5 * dt, y + 0.5 * dt * k1, k2);
  nfe += 2;
  return y + dt * k2;
}

Eigen::VectorXd step_rk4(const OdeField& f, const Eigen::VectorXd& y, double t, double dt, long& nfe) {
  Eigen::VectorXd k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size());
  f(t, y, k1);
  f(t + 0.5 * dt, y + 0.5 * dt * k1, k2);
  f(t + 0.5 * dt, y + 0.5 * dt * k2, k3);
  f(t + dt, y + dt * k3, k4);
  nfe += 4;
  return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace {

void check_state(const Eigen::VectorXd& y, double t) {
  if (!y.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite state at t = " << t;
    throw SamplingError(msg.str());
  }
}

// Keeps the first and last entries and an even spread in between.
template <typename T>
std::vector<T> decimate(const std::vector<T>& v, std::size_t cap) {
  if (v.size() <= cap) return v;
  std::vector<T> out;
  out.reserve(cap);
  for (std::size_t k = 0; k < cap; ++k) {
    const std::size_t idx = (k * (v.size() - 1) + (cap - 1) / 2) / (cap - 1);
    out.push_back(v[idx]);
  }
  return out;
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

void solve_dopri5(const OdeField& f, OdeSolution& sol, const IntegratorSpec& spec, double t_start, double t_end) {
  const Eigen::Index n = sol.y.size();
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), y_new(n), err(n), scale(n);
  const double span = t_start - t_end;
  double t = t_start;
  double h = std::min(spec.initial_step, span);
  double err_prev = 1e-4;
  bool last_rejected = false;

  auto eval = [&](double tt, const Eigen::VectorXd& yy, Eigen::VectorXd& out) {
    if (sol.nfe >= spec.max_nfe) {
      std::ostringstream msg;
      msg << "dopri5 exceeded max_nfe = " << spec.max_nfe << " at t = " << t;
      throw SamplingError(msg.str());
    }
    f(tt, yy, out);
    ++sol.nfe;
    ++sol.nfe_by_interval[static_cast<size_t>(nfe_bin(tt))];
  };

  eval(t, sol.y, k1);
  constexpr double kAlpha = 0.7 / 5.0;
  constexpr double kBeta = 0.4 / 5.0;
  while (t > t_end) {
    if (t - h <= t_end || t - h - t_end < 1e-12 * span) h = t - t_end;
    const double dt = -h;
    const Eigen::VectorXd& y = sol.y;
    eval(t + c2 * dt, y + dt * (a21 * k1), k2);
    eval(t + c3 * dt, y + dt * (a31 * k1 + a32 * k2), k3);
    eval(t + c4 * dt, y + dt * (a41 * k1 + a42 * k2 + a43 * k3), k4);
    eval(t + c5 * dt, y + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
    const double t_next = (h == t - t_end) ? t_end : t + dt;
    eval(t_next, y + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), k6);
    y_new = y + dt * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    eval(t_next, y_new, k7);
    err = dt * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    scale = (spec.atol + spec.rtol * y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array()).matrix();
    const double err_norm = std::sqrt((err.array() / scale.array()).square().mean());
    if (!std::isfinite(err_norm)) check_state(y_new, t_next);

    if (err_norm <= 1.0) {
      check_state(y_new, t_next);
      sol.y = y_new;
      t = t_next;
      k1 = k7;  // first-same-as-last
      ++sol.accepted;
      sol.max_accepted_error = std::max(sol.max_accepted_error, err_norm);
      sol.times.push_back(t);
      sol.states.push_back(sol.y);
      double factor = err_norm == 0.0 ? spec.max_factor
                                      : spec.safety * std::pow(err_norm, -kAlpha) * std::pow(err_prev, kBeta);
      factor = std::clamp(factor, spec.min_factor, spec.max_factor);
      if (last_rejected) factor = std::min(factor, 1.0);
      h *= factor;
      err_prev = std::max(err_norm, 1e-4);
      last_rejected = false;
    } else {
      ++sol.rejected;
      const double factor = std::max(spec.min_factor, spec.safety * std::pow(err_norm, -kAlpha));
      h *= factor;
      last_rejected = true;
      if (h < 1e-14 * std::max(1.0, span)) {
        std::ostringstream msg;
        msg << "dopri5 step size underflow at t = " << t;
        throw SamplingError(msg.str());
      }
    }
  }
}

}  // namespace

OdeSolution solve_ode(const OdeField& f, const Eigen::VectorXd& y_start, const IntegratorSpec& spec, double t_start,
                      double t_end) {
  spec.validate();
  if (!(t_end < t_start)) throw SamplingError("solve_ode integrates towards smaller t");
  check_state(y_start, t_start);
  OdeSolution sol;
  sol.y = y_start;
  sol.times.push_back(t_start);
  sol.states.push_back(y_start);

  if (spec.method == IntegratorMethod::Dopri5) {
    solve_dopri5(f, sol, spec, t_start, t_end);
  } else {
    // Fixed-step methods: wrap the field so that evaluations are binned by t.
    const OdeField counted = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
      f(t, y, dy);
      ++sol.nfe_by_interval[static_cast<size_t>(nfe_bin(t))];
    };
    const double dt = (t_end - t_start) / spec.n_steps;
    for (int s = 0; s < spec.n_steps; ++s) {
      const double t = t_start + s * dt;
      const double t_next = s + 1 == spec.n_steps ? t_end : t_start + (s + 1) * dt;
      switch (spec.method) {
        case IntegratorMethod::Euler: sol.y = step_euler(counted, sol.y, t, dt, sol.nfe); break;
        case IntegratorMethod::Midpoint: sol.y = step_midpoint(counted, sol.y, t, dt, sol.nfe); break;
        default: sol.y = step_rk4(counted, sol.y, t, dt, sol.nfe); break;
      }
      check_state(sol.y, t_next);
      ++sol.accepted;
      sol.times.push_back(t_next);
      sol.states.push_back(sol.y);
    }
  }
  if (!spec.full_trajectory) {
    sol.times = decimate(sol.times, kMaxStoredStates);
    sol.states = decimate(sol.states, kMaxStoredStates);
  }
  return sol;
}

Eigen::VectorXd pack(const MoleculeGeometry& g) {
  const Eigen::Index n = g.coords.rows();
  const Eigen::Index d = g.features.cols();
  Eigen::VectorXd y(n * (3 + d));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) y[i * 3 + k] = g.coords(i, k);
    for (Eigen::Index k = 0; k < d; ++k) y[n * 3 + i * d + k] = g.features(i, k);
  }
  return y;
}

MoleculeGeometry unpack(const Eigen::VectorXd& y, int n_nodes, int feature_dim) {
  if (y.size() != static_cast<Eigen::Index>(n_nodes) * (3 + feature_dim))
    throw SamplingError("unpack: state length does not match the node count and feature width");
  MoleculeGeometry g;
  g.coords.resize(n_nodes, 3);
  g.features.resize(n_nodes, feature_dim);
  for (int i = 0; i < n_nodes; ++i) {
    for (int k = 0; k < 3; ++k) g.coords(i, k) = y[i * 3 + k];
    for (int k = 0; k < feature_dim; ++k) g.features(i, k) = y[n_nodes * 3 + i * feature_dim + k];
  }
  return g;
}

Trajectory integrate(const VectorFieldModel& m, const MoleculeGeometry& g1, const IntegratorSpec& spec) {
  const int n = g1.n_nodes();
  const int d = g1.feature_dim();
  if (n < 1) throw SamplingError("integrate: empty molecule");
  if (d != m.dims().feature_dim) throw SamplingError("integrate: feature width does not match the model");
  MoleculeGeometry start = g1;
  project_zero_com_inplace(start.coords);

  const OdeField field = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const FieldOutput out = forward(m, unpack(y, n, d), t);
    MoleculeGeometry v{out.vx, out.vh};
    dy = pack(v);
  };
  const OdeSolution sol = solve_ode(field, pack(start), spec, 1.0, 0.0);

  Trajectory traj;
  traj.nfe_total = sol.nfe;
  traj.nfe_by_interval = sol.nfe_by_interval;
  traj.rejected_steps = sol.rejected;
  traj.states.reserve(sol.states.size());
  for (std::size_t k = 0; k < sol.states.size(); ++k) traj.states.emplace_back(sol.times[k], unpack(sol.states[k], n, d));
  return traj;
}

MoleculeGeometry draw_prior(int n_nodes, int feature_dim, Rng& rng) {
  if (n_nodes < 1) throw SamplingError("draw_prior: node count must be positive");
  MoleculeGeometry g;
  g.coords = project_zero_com(gaussian_cloud(n_nodes, rng));
  std::normal_distribution<double> normal(0.0, 1.0);
  g.features.resize(n_nodes, feature_dim);
  for (int i = 0; i < n_nodes; ++i)
    for (int k = 0; k < feature_dim; ++k) g.features(i, k) = normal(rng);
  return g;
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

int most_probable_charge(double h, double sigma0) {
  const double lo = std::floor(h);
  double best_k = lo;
  double best_p = -1.0;
  for (double k = lo - 1.0; k <= lo + 2.0; k += 1.0) {
    const double p = normal_cdf((k + 0.5 - h) / sigma0) - normal_cdf((k - 0.5 - h) / sigma0);
    if (p > best_p) {
      best_p = p;
      best_k = k;
    }
  }
  return static_cast<int>(best_k);
}

}  // namespace

DiscreteFeatures discretize_features(const Eigen::MatrixXd& h0, const FeatureLayout& layout, double sigma0) {
  if (h0.cols() != layout.dim()) throw SamplingError("discretize_features: feature width does not match the layout");
  if (!(sigma0 > 0.0)) throw SamplingError("discretize_features: sigma0 must be positive");
  if (!h0.allFinite()) throw SamplingError("discretize_features: non-finite features");
  DiscreteFeatures out;
  const int nt = layout.n_types();
  for (Eigen::Index i = 0; i < h0.rows(); ++i) {
    Eigen::Index arg = 0;
    h0.row(i).head(nt).maxCoeff(&arg);
    out.types.push_back(static_cast<int>(arg));
    out.charges.push_back(layout.charge_channel ? most_probable_charge(h0(i, layout.charge_column()), sigma0) : 0);
  }
  return out;
}

Molecule to_molecule(const MoleculeGeometry& g, const FeatureLayout& layout) {
  DiscreteFeatures f = discretize_features(g.features, layout);
  return {g.coords, std::move(f.types), std::move(f.charges)};
}

std::vector<int> draw_node_counts(const std::map<int, int>& histogram, int n, Rng& rng) {
  std::vector<int> sizes;
  std::vector<double> weights;
  for (const auto& [size, count] : histogram) {
    if (size < 1 || count < 0) throw SamplingError("node-count histogram has an invalid entry");
    sizes.push_back(size);
    weights.push_back(count);
  }
  if (sizes.empty() || std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; }))
    throw SamplingError("node-count histogram is empty");
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  std::vector<int> out(static_cast<size_t>(std::max(n, 0)));
  for (int& v : out) v = sizes[static_cast<size_t>(pick(rng))];
  return out;
}

SampleSet sample_batch(const VectorFieldModel& m, int n_samples, const std::vector<int>& node_counts,
                       const IntegratorSpec& spec, const FeatureLayout& layout, Rng& rng) {
  if (n_samples < 0) throw SamplingError("n_samples must be non-negative");
  if (node_counts.size() != static_cast<size_t>(n_samples))
    throw SamplingError("node_counts must have one entry per sample");
  if (layout.dim() != m.dims().feature_dim) throw SamplingError("feature layout does not match the model");
  spec.validate();
  SampleSet set;
  for (int s = 0; s < n_samples; ++s) {
    const MoleculeGeometry g1 = draw_prior(node_counts[static_cast<size_t>(s)], layout.dim(), rng);
    IntegratorSpec lean = spec;
    lean.full_trajectory = false;
    const Trajectory traj = integrate(m, g1, lean);
    set.continuous.push_back(traj.final_state());
    set.molecules.push_back(to_molecule(traj.final_state(), layout));
    set.nfe.push_back(traj.nfe_total);
    set.nfe_total += traj.nfe_total;
    for (int b = 0; b < kNfeBins; ++b) set.nfe_by_interval[static_cast<size_t>(b)] += traj.nfe_by_interval[static_cast<size_t>(b)];
  }
  return set;
}

}  // namespace equifm
