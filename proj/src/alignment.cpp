#include "equifm/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace equifm {

Permutation solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols())
    throw GeometryError("assignment cost matrix must be square, got " + std::to_string(cost.rows()) +
                        "x" + std::to_string(cost.cols()));
  if (!cost.allFinite()) throw GeometryError("assignment cost matrix contains a non-finite entry");

  const int n = static_cast<int>(cost.rows());
  if (n == 0) return Permutation{};
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Shortest augmenting paths with dual potentials; index 0 is a sentinel
  // column, rows and columns are 1-based inside the loop.
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> col_owner(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  std::vector<double> min_slack(static_cast<size_t>(n) + 1);
  std::vector<char> used(static_cast<size_t>(n) + 1);

  for (int row = 1; row <= n; ++row) {
    col_owner[0] = row;
    int j0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = col_owner[static_cast<size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double reduced = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (reduced < min_slack[static_cast<size_t>(j)]) {
          min_slack[static_cast<size_t>(j)] = reduced;
          way[static_cast<size_t>(j)] = j0;
        }
        if (min_slack[static_cast<size_t>(j)] < delta) {
          delta = min_slack[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(col_owner[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          min_slack[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (col_owner[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      col_owner[static_cast<size_t>(j0)] = col_owner[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  Permutation p;
  p.mapping.assign(static_cast<size_t>(n), -1);
  for (int j = 1; j <= n; ++j) p.mapping[static_cast<size_t>(col_owner[static_cast<size_t>(j)] - 1)] = j - 1;
  return p;
}

SymmetricEigen3 jacobi_eigen3(const Eigen::Matrix3d& input, int max_sweeps, double tol) {
  Eigen::Matrix3d a = 0.5 * (input + input.transpose());
  Eigen::Matrix3d vecs = Eigen::Matrix3d::Identity();
  const double scale = std::max(a.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());

  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    const double off = std::abs(a(0, 1)) + std::abs(a(0, 2)) + std::abs(a(1, 2));
    if (off <= tol * scale) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= std::numeric_limits<double>::min()) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
        rot(p, p) = c;
        rot(q, q) = c;
        rot(p, q) = s;
        rot(q, p) = -s;
        a = rot.transpose() * a * rot;
        a(p, q) = a(q, p) = 0.0;
        vecs = vecs * rot;
      }
    }
  }

  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) > a(j, j); });
  SymmetricEigen3 out;
  out.sweeps = sweep;
  for (int k = 0; k < 3; ++k) {
    out.values[k] = a(order[static_cast<size_t>(k)], order[static_cast<size_t>(k)]);
    out.vectors.col(k) = vecs.col(order[static_cast<size_t>(k)]);
  }
  return out;
}

namespace {

// Any unit vector orthogonal to `a`.
Eigen::Vector3d orthogonal_unit(const Eigen::Vector3d& a) {
  Eigen::Vector3d trial = std::abs(a.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  return (trial - trial.dot(a) * a).normalized();
}

}  // namespace

KabschResult kabsch(const PointCloud& z, const PointCloud& y) {
  if (z.rows() != y.rows())
    throw GeometryError("kabsch: clouds have " + std::to_string(z.rows()) + " and " +
                        std::to_string(y.rows()) + " points");
  check_cloud(z);
  check_cloud(y);
  const PointCloud zc = project_zero_com(z);
  const PointCloud yc = project_zero_com(y);

  // Cross-covariance H = sum_i z_i y_i^T with SVD H = U S V^T; the optimum is
  // R = V diag(1, 1, sign det H) U^T. The right singular vectors come from
  // the eigen-decomposition of H^T H, the left ones from H v_k / s_k.
  const Eigen::Matrix3d h = zc.transpose() * yc;
  const SymmetricEigen3 eig = jacobi_eigen3(h.transpose() * h);
  const double s1 = std::sqrt(std::max(eig.values[0], 0.0));
  const double magnitude = zc.norm() * yc.norm();
  if (!(s1 > 1e-13 * magnitude) || magnitude == 0.0) return {Rotation::identity(), true};

  const Eigen::Vector3d v1 = eig.vectors.col(0);
  const Eigen::Vector3d u1 = (h * v1) / s1;
  Eigen::Vector3d v2 = eig.vectors.col(1);
  v2 = (v2 - v2.dot(v1) * v1).normalized();
  Eigen::Vector3d u2 = h * v2;
  u2 -= u2.dot(u1) * u1;
  if (u2.norm() > 1e-10 * s1) {
    u2.normalize();
  } else {
    // Rank one: every rotation taking u1 onto v1 is optimal.
    u2 = orthogonal_unit(u1);
    v2 = orthogonal_unit(v1);
  }
  // Completing both frames with cross products makes the third term carry
  // sign(det H), which is exactly the reflection correction.
  const Eigen::Matrix3d r = v1 * u1.transpose() + v2 * u2.transpose() + v1.cross(v2) * u1.cross(u2).transpose();
  return {Rotation{r}, false};
}

namespace {

Eigen::MatrixXd pairwise_sq_dist(const PointCloud& y, const PointCloud& rz) {
  const Eigen::VectorXd yn = y.rowwise().squaredNorm();
  const Eigen::VectorXd zn = rz.rowwise().squaredNorm();
  Eigen::MatrixXd c = -2.0 * (y * rz.transpose());
  c.colwise() += yn;
  c.rowwise() += zn.transpose();
  return c.cwiseMax(0.0);
}

void check_pair(const PointCloud& z, const PointCloud& y) {
  if (z.rows() != y.rows())
    throw GeometryError("EOT: clouds have " + std::to_string(z.rows()) + " and " + std::to_string(y.rows()) +
                        " points");
  check_cloud(z);
  check_cloud(y);
}

}  // namespace

EotPlan solve_eot_from(const PointCloud& z, const PointCloud& y, const Rotation& start, const EotOptions& options,
                       std::vector<double>* objective) {
  check_pair(z, y);
  if (options.max_iter < 1) throw GeometryError("EOT: max_iter must be at least 1");
  const PointCloud zc = project_zero_com(z);
  const PointCloud yc = project_zero_com(y);

  EotPlan plan;
  plan.rotation = start;
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= options.max_iter; ++it) {
    plan.permutation = solve_assignment(pairwise_sq_dist(yc, rotate(zc, plan.rotation)));
    plan.rotation = kabsch(permute(zc, plan.permutation), yc).rotation;
    plan.cost = squared_cost(apply(zc, plan.rotation, plan.permutation), yc);
    plan.iterations = it;
    if (objective) objective->push_back(plan.cost);
    if (std::abs(previous - plan.cost) < options.tol) break;
    previous = plan.cost;
  }
  return plan;
}

EotPlan solve_eot(const PointCloud& z, const PointCloud& y, const EotOptions& options, Rng& rng, EotTrace* trace) {
  check_pair(z, y);
  if (options.restarts < 0) throw GeometryError("EOT: restarts must be non-negative");
  EotPlan best;
  best.cost = std::numeric_limits<double>::infinity();
  for (int start = 0; start <= options.restarts; ++start) {
    const Rotation init = start == 0 ? Rotation::identity() : random_rotation(rng);
    std::vector<double> objective;
    EotPlan plan = solve_eot_from(z, y, init, options, trace ? &objective : nullptr);
    if (trace) trace->objective_by_start.push_back(std::move(objective));
    if (plan.cost < best.cost) best = std::move(plan);
  }
  return best;
}

EotPlan brute_force_eot(const PointCloud& z, const PointCloud& y) {
  check_pair(z, y);
  if (z.rows() > 8) throw GeometryError("brute_force_eot supports at most 8 points");
  const PointCloud zc = project_zero_com(z);
  const PointCloud yc = project_zero_com(y);

  EotPlan best;
  best.cost = std::numeric_limits<double>::infinity();
  Permutation p = Permutation::identity(static_cast<int>(z.rows()));
  do {
    const PointCloud zp = permute(zc, p);
    const Rotation r = kabsch(zp, yc).rotation;
    const double cost = squared_cost(rotate(zp, r), yc);
    if (cost < best.cost) {
      best.cost = cost;
      best.permutation = p;
      best.rotation = r;
    }
  } while (std::next_permutation(p.mapping.begin(), p.mapping.end()));
  best.iterations = 1;
  return best;
}

}  // namespace equifm
