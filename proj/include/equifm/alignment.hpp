#pragma once

// Equivariant optimal transport between two point clouds: the joint
// permutation + rotation minimizing sum_i |R z[pi(i)] - y[i]|^2.
//
// The solver alternates an exact linear assignment (shortest augmenting path,
// Jonker-Volgenant family) with a Kabsch rotation fit, from several starting
// rotations. brute_force_eot enumerates permutations and is exact for small N.

#include "equifm/geometry.hpp"

#include <Eigen/Dense>

namespace equifm {

/// Minimizes sum_i cost(i, p[i]) exactly. O(N^3).
Permutation solve_assignment(const Eigen::MatrixXd& cost);

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
/// Eigenvalues are returned in descending order, eigenvectors as columns.
struct SymmetricEigen3 {
  Eigen::Vector3d values;
  Eigen::Matrix3d vectors;
  int sweeps = 0;
};
SymmetricEigen3 jacobi_eigen3(const Eigen::Matrix3d& a, int max_sweeps = 30, double tol = 1e-14);

struct KabschResult {
  Rotation rotation;
  /// True when both clouds collapse onto the origin and no rotation is determined.
  bool degenerate = false;
};

/// Proper rotation R minimizing sum_i |R z_i - y_i|^2 for the given row pairing.
/// Both clouds are centered internally.
KabschResult kabsch(const PointCloud& z, const PointCloud& y);

struct EotPlan {
  Permutation permutation;
  Rotation rotation;
  /// squared_cost(apply(z, rotation, permutation), y) on the centered clouds.
  double cost = 0.0;
  int iterations = 0;
};

struct EotOptions {
  int max_iter = 100;
  double tol = 1e-9;
  /// Random-rotation starts in addition to the identity start.
  int restarts = 1;
};

/// Per-start objective values, for tests that check monotone descent.
struct EotTrace {
  std::vector<std::vector<double>> objective_by_start;
};

EotPlan solve_eot(const PointCloud& z, const PointCloud& y, const EotOptions& options, Rng& rng,
                  EotTrace* trace = nullptr);

/// Runs the alternating descent from one fixed initial rotation.
EotPlan solve_eot_from(const PointCloud& z, const PointCloud& y, const Rotation& start,
                       const EotOptions& options, std::vector<double>* objective = nullptr);

/// Exhaustive search over all N! pairings, each with its Kabsch rotation. N <= 8.
EotPlan brute_force_eot(const PointCloud& z, const PointCloud& y);

}  // namespace equifm
