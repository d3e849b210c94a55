#pragma once

// Generation: integrate dg/dt = v(g, t) backwards from the prior at t = 1 to
// t = 0, then map the continuous features onto atom types and charges.

#include "equifm/molecule.hpp"
#include "equifm/vectorfield.hpp"

#include <array>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace equifm {

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class IntegratorMethod { Euler, Midpoint, Rk4, Dopri5 };

std::string to_string(IntegratorMethod m);
IntegratorMethod parse_integrator(const std::string& name);

inline constexpr int kNfeBins = 20;
inline constexpr std::size_t kMaxStoredStates = 64;

struct IntegratorSpec {
  IntegratorMethod method = IntegratorMethod::Dopri5;
  int n_steps = 100;
  double rtol = 1e-4;
  double atol = 1e-4;
  int max_nfe = 100000;
  /// Magnitude of the first dopri5 step (taken towards t = 0).
  double initial_step = 1e-2;
  double safety = 0.9;
  double min_factor = 0.2;
  double max_factor = 5.0;
  /// Keep every accepted state instead of decimating to kMaxStoredStates.
  bool full_trajectory = false;

  /// Method defaults: 100 steps for euler/midpoint, 50 for rk4.
  static IntegratorSpec for_method(IntegratorMethod m);
  void validate() const;
};

using OdeField = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt)>;

struct OdeSolution {
  Eigen::VectorXd y;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  long nfe = 0;
  std::array<long, kNfeBins> nfe_by_interval{};
  int accepted = 0;
  int rejected = 0;
  /// Largest scaled local error estimate among accepted dopri5 steps.
  double max_accepted_error = 0.0;
};

/// Bin of the 20 uniform t-intervals that contains t (t = 1 falls in the last).
int nfe_bin(double t);

/// Single steps of the classical methods; dt < 0 integrates towards t = 0.
/// Each evaluation of `f` increments `nfe` (1, 2 and 4 per step).
Eigen::VectorXd step_euler(const OdeField& f, const Eigen::VectorXd& y, double t, double dt, long& nfe);
Eigen::VectorXd step_midpoint(const OdeField& f, const Eigen::VectorXd& y, double t, double dt, long& nfe);
Eigen::VectorXd step_rk4(const OdeField& f, const Eigen::VectorXd& y, double t, double dt, long& nfe);

/// Integrates from t_start to t_end (t_end < t_start).
OdeSolution solve_ode(const OdeField& f, const Eigen::VectorXd& y_start, const IntegratorSpec& spec,
                      double t_start = 1.0, double t_end = 0.0);

struct Trajectory {
  std::vector<std::pair<double, MoleculeGeometry>> states;
  long nfe_total = 0;
  std::array<long, kNfeBins> nfe_by_interval{};
  int rejected_steps = 0;

  const MoleculeGeometry& final_state() const { return states.back().second; }
};

Eigen::VectorXd pack(const MoleculeGeometry& g);
MoleculeGeometry unpack(const Eigen::VectorXd& y, int n_nodes, int feature_dim);

/// Solves the learned ODE from g1 at t = 1 to t = 0.
Trajectory integrate(const VectorFieldModel& m, const MoleculeGeometry& g1, const IntegratorSpec& spec);

/// Zero-CoM standard-normal coordinates and standard-normal features.
MoleculeGeometry draw_prior(int n_nodes, int feature_dim, Rng& rng);

inline constexpr double kChargeSigma = 0.25;

struct DiscreteFeatures {
  std::vector<int> types;
  std::vector<int> charges;
};

/// Type = argmax of the one-hot block; charge = the integer k maximizing
/// P(k - 1/2 < u < k + 1/2) for u ~ N(h_charge, sigma0^2), which is the
/// nearest integer.
DiscreteFeatures discretize_features(const Eigen::MatrixXd& h0, const FeatureLayout& layout,
                                     double sigma0 = kChargeSigma);
Molecule to_molecule(const MoleculeGeometry& g, const FeatureLayout& layout);

/// n draws from the empirical node-count histogram.
std::vector<int> draw_node_counts(const std::map<int, int>& histogram, int n, Rng& rng);

struct SampleSet {
  std::vector<Molecule> molecules;
  std::vector<MoleculeGeometry> continuous;
  std::vector<long> nfe;
  std::array<long, kNfeBins> nfe_by_interval{};
  long nfe_total = 0;
};

/// One prior draw and ODE solve per entry of node_counts, in order.
SampleSet sample_batch(const VectorFieldModel& m, int n_samples, const std::vector<int>& node_counts,
                       const IntegratorSpec& spec, const FeatureLayout& layout, Rng& rng);

}  // namespace equifm
