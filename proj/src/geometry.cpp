#include "equifm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace equifm {

bool Rotation::is_valid(double tol) const {
  if (!matrix.allFinite()) return false;
  const Eigen::Matrix3d gram = matrix * matrix.transpose();
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(matrix.determinant() - 1.0) <= tol;
}

Permutation Permutation::identity(int n) {
  Permutation p;
  p.mapping.resize(static_cast<size_t>(n));
  std::iota(p.mapping.begin(), p.mapping.end(), 0);
  return p;
}

bool Permutation::is_valid() const {
  std::vector<char> seen(mapping.size(), 0);
  for (int v : mapping) {
    if (v < 0 || v >= size() || seen[static_cast<size_t>(v)]) return false;
    seen[static_cast<size_t>(v)] = 1;
  }
  return true;
}

Permutation Permutation::inverse() const {
  Permutation inv;
  inv.mapping.resize(mapping.size());
  for (int i = 0; i < size(); ++i) inv.mapping[static_cast<size_t>(mapping[static_cast<size_t>(i)])] = i;
  return inv;
}

Permutation Permutation::after(const Permutation& first) const {
  if (first.size() != size()) throw GeometryError("permutation length mismatch");
  // permute(permute(x, first), *this)[i] = x[first[this[i]]]
  Permutation out;
  out.mapping.resize(mapping.size());
  for (size_t i = 0; i < mapping.size(); ++i)
    out.mapping[i] = first.mapping[static_cast<size_t>(mapping[i])];
  return out;
}

void check_cloud(const PointCloud& x) {
  if (x.rows() < 1) throw GeometryError("point cloud must contain at least one point");
  if (!x.allFinite()) throw GeometryError("point cloud contains a non-finite coordinate");
}

Eigen::RowVector3d center_of_mass(const PointCloud& x) { return x.colwise().mean(); }

PointCloud project_zero_com(const PointCloud& x) {
  check_cloud(x);
  PointCloud out = x;
  project_zero_com_inplace(out);
  return out;
}

void project_zero_com_inplace(Eigen::Ref<Eigen::MatrixXd> x) {
  if (x.rows() == 0) return;
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
}

void project_zero_com_inplace(PointCloud& x) {
  if (x.rows() == 0) return;
  const Eigen::RowVector3d mean = x.colwise().mean();
  x.rowwise() -= mean;
}

Rotation random_rotation(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector4d q;
  do {
    for (int k = 0; k < 4; ++k) q[k] = normal(rng);
  } while (q.norm() < 1e-12);
  q.normalize();
  const Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
  return {quat.toRotationMatrix()};
}

Rotation axis_angle(const Eigen::Vector3d& axis, double angle) {
  return {Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix()};
}

PointCloud rotate(const PointCloud& x, const Rotation& r) { return x * r.matrix.transpose(); }

PointCloud permute(const PointCloud& x, const Permutation& p) {
  if (p.size() != x.rows())
    throw GeometryError("permutation length " + std::to_string(p.size()) + " does not match " +
                        std::to_string(x.rows()) + " points");
  PointCloud out(x.rows(), 3);
  for (int i = 0; i < p.size(); ++i) out.row(i) = x.row(p.mapping[static_cast<size_t>(i)]);
  return out;
}

PointCloud apply(const PointCloud& x, const Rotation& r, const Permutation& p) {
  return permute(rotate(x, r), p);
}

double squared_cost(const PointCloud& a, const PointCloud& b) {
  if (a.rows() != b.rows())
    throw GeometryError("squared_cost: clouds have " + std::to_string(a.rows()) + " and " +
                        std::to_string(b.rows()) + " points");
  return (a - b).squaredNorm();
}

PointCloud gaussian_cloud(int n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  PointCloud x(n, 3);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) x(i, k) = normal(rng);
  return x;
}

Permutation random_permutation(int n, Rng& rng) {
  Permutation p = Permutation::identity(n);
  std::shuffle(p.mapping.begin(), p.mapping.end(), rng);
  return p;
}

}  // namespace equifm
