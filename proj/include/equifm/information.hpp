#pragma once

// Mutual-information diagnostics along conditional paths.
//
// mi_hh: I(h_t; h0) for a Gaussian path over a finite feature alphabet. The
// posterior p(k | h_t) is an exact mixture computation, so the Monte-Carlo
// average of log p(k | h_t) - log p_k is unbiased for the MI.
//
// mi_xh: a difference-of-entropy lower bound on I(x_t; type | N). A per-node
// multinomial logistic model reads 8 distance statistics of x_t and predicts
// the node's type; its held-out log-likelihood gain over the size-conditional
// marginal p(type | N) is the estimate. Conditioning on the node count N
// matters because N alone already reveals a lot about the type mix.

#include "equifm/data.hpp"
#include "equifm/paths.hpp"

#include <string>
#include <vector>

namespace equifm {

struct MiEstimate {
  double t = 0.0;
  double value = 0.0;  // nats
  std::string estimator;  // "exact-discrete" or "classifier"
  double std_error = 0.0;
  /// Entropy the estimate is bounded by: H(h0) for mi_hh, H(type | N) for mi_xh.
  double entropy = 0.0;

  double normalized() const { return entropy > 0.0 ? value / entropy : 0.0; }
};

struct FeatureAlphabet {
  std::vector<Eigen::VectorXd> symbols;
  std::vector<double> probs;
  double entropy() const;
};

/// Distinct feature rows of all nodes with their empirical frequencies.
FeatureAlphabet feature_alphabet(const Dataset& ds);

/// h_t = alpha * h0 + sigma * eps with h0 drawn from the alphabet.
MiEstimate mi_hh(const FeatureAlphabet& alphabet, double alpha, double sigma, int n_mc, Rng& rng);
MiEstimate mi_hh(const Dataset& ds, const ConditionalPath& path_h, double t, int n_mc, Rng& rng);

struct ClassifierConfig {
  int steps = 2000;
  double learning_rate = 0.05;
  double l2 = 1e-4;
  double test_fraction = 0.3;
  /// Soft neighbor count: sum_j sigmoid((cutoff - d_ij) / width).
  double neighbor_cutoff = 1.6;
  double neighbor_width = 0.1;
  /// Drives the train/test split and the path noise. The same seed gives the
  /// same noise at every t, which keeps curves over t smooth.
  std::uint64_t seed = 0;
  int eot_restarts = 0;
};

inline constexpr int kDistanceFeatures = 8;

/// Per node: the 4 nearest-neighbor distances (padded with the largest
/// distance), distance to the centroid, mean and max distance to other
/// nodes, and the soft neighbor count.
Eigen::MatrixXd distance_features(const PointCloud& x, const ClassifierConfig& cfg = {});

MiEstimate mi_xh(const Dataset& ds, const ConditionalPath& path_x, double t, const ClassifierConfig& cfg = {});

/// n points evenly spaced on [0, 1], both endpoints included.
std::vector<double> unit_grid(int n);

}  // namespace equifm
