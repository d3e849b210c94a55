#pragma once

// Point-cloud primitives shared by every other module.
//
// Coordinate convention: a cloud is an N x 3 matrix whose ROWS are points.
// A rotation R acts on a point p (a column 3-vector) as R * p, so on a whole
// cloud it is applied as X * R^T. All geometry is double precision.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace equifm {

using Rng = std::mt19937_64;

/// N x 3 coordinates, one point per row.
using PointCloud = Eigen::Matrix<double, Eigen::Dynamic, 3>;

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Rotation {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();

  static Rotation identity() { return {}; }
  Rotation inverse() const { return {matrix.transpose()}; }
  /// Applies `other` first, then `*this`.
  Rotation compose(const Rotation& other) const { return {matrix * other.matrix}; }
  /// Orthogonality and det(R) = +1 to within `tol` per entry.
  bool is_valid(double tol = 1e-9) const;
};

/// result[i] = source[mapping[i]].
struct Permutation {
  std::vector<int> mapping;

  static Permutation identity(int n);
  int size() const { return static_cast<int>(mapping.size()); }
  bool is_valid() const;
  Permutation inverse() const;
  /// Permutation equivalent to permuting by `first` and then by `*this`.
  Permutation after(const Permutation& first) const;
};

/// Throws GeometryError when the cloud is empty or contains a non-finite entry.
void check_cloud(const PointCloud& x);

Eigen::RowVector3d center_of_mass(const PointCloud& x);

/// Subtracts the column-wise mean so the cloud lies in the Zero-CoM subspace.
PointCloud project_zero_com(const PointCloud& x);

/// Same projection for an arbitrary N x k block (used on vector fields).
void project_zero_com_inplace(Eigen::Ref<Eigen::MatrixXd> x);
void project_zero_com_inplace(PointCloud& x);

/// Uniform on SO(3): a normalized 4-vector of standard normals read as a unit
/// quaternion.
Rotation random_rotation(Rng& rng);

/// Rotation by `angle` radians about `axis` (normalized internally).
Rotation axis_angle(const Eigen::Vector3d& axis, double angle);

/// result[i] = R * x[p[i]]: rotate every point, then reorder rows.
PointCloud apply(const PointCloud& x, const Rotation& r, const Permutation& p);
PointCloud rotate(const PointCloud& x, const Rotation& r);
PointCloud permute(const PointCloud& x, const Permutation& p);

/// Sum over rows of the squared Euclidean distance between paired points.
double squared_cost(const PointCloud& a, const PointCloud& b);

/// Standard-normal cloud with N points (not projected).
PointCloud gaussian_cloud(int n, Rng& rng);

Permutation random_permutation(int n, Rng& rng);

}  // namespace equifm
