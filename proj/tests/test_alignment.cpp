#include <doctest.h>

#include "equifm/alignment.hpp"

#include <algorithm>
#include <numeric>

using namespace equifm;

namespace {

double assignment_total(const Eigen::MatrixXd& c, const Permutation& p) {
  double s = 0.0;
  for (int i = 0; i < p.size(); ++i) s += c(i, p.mapping[static_cast<size_t>(i)]);
  return s;
}

// Enumeration oracle for the linear assignment problem.
double brute_assignment(const Eigen::MatrixXd& c) {
  std::vector<int> p(static_cast<size_t>(c.rows()));
  std::iota(p.begin(), p.end(), 0);
  double best = 1e300;
  do {
    double s = 0.0;
    for (size_t i = 0; i < p.size(); ++i) s += c(static_cast<Eigen::Index>(i), p[i]);
    best = std::min(best, s);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

// cost(i, j) = |y_i - z_j|^2, so result[i] = z[p[i]] pairs with y_i.
Eigen::MatrixXd pair_costs(const PointCloud& z, const PointCloud& y) {
  Eigen::MatrixXd c(y.rows(), z.rows());
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = 0; j < z.rows(); ++j) c(i, j) = (y.row(i) - z.row(j)).squaredNorm();
  return c;
}

}  // namespace

TEST_CASE("assignment") {
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 1, 0;
  CHECK(solve_assignment(a).mapping == std::vector<int>{0, 1});
  a << 1, 0, 0, 1;
  CHECK(solve_assignment(a).mapping == std::vector<int>{1, 0});

  Rng rng(21);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 25; ++trial) {
    Eigen::MatrixXd c(6, 6);
    for (Eigen::Index i = 0; i < 36; ++i) c.data()[i] = u(rng);
    const Permutation p = solve_assignment(c);
    REQUIRE(p.is_valid());
    CHECK(assignment_total(c, p) == doctest::Approx(brute_assignment(c)).epsilon(1e-12));
  }
  CHECK_THROWS(solve_assignment(Eigen::MatrixXd::Zero(2, 3)));
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS(solve_assignment(bad));
}

TEST_CASE("jacobi eigen-decomposition of a symmetric 3x3") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Matrix3d b = gaussian_cloud(3, rng);
    const Eigen::Matrix3d s = b.transpose() * b;
    const SymmetricEigen3 e = jacobi_eigen3(s);
    CHECK(e.values[0] >= e.values[1]);
    CHECK(e.values[1] >= e.values[2]);
    const Eigen::Matrix3d recon = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    CHECK((recon - s).cwiseAbs().maxCoeff() < 1e-11 * std::max(1.0, s.norm()));
    CHECK((e.vectors.transpose() * e.vectors - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("kabsch") {
  Rng rng(9);
  SUBCASE("recovers a known rotation") {
    const PointCloud z = project_zero_com(gaussian_cloud(8, rng));
    const Rotation r0 = random_rotation(rng);
    const KabschResult k = kabsch(z, rotate(z, r0));
    CHECK_FALSE(k.degenerate);
    CHECK((k.rotation.matrix - r0.matrix).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("identical clouds give the identity") {
    const PointCloud z = gaussian_cloud(5, rng);
    CHECK((kabsch(z, z).rotation.matrix - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("beats 10000 random rotations") {
    const PointCloud z = project_zero_com(gaussian_cloud(5, rng));
    const PointCloud y = project_zero_com(gaussian_cloud(5, rng));
    const KabschResult k = kabsch(z, y);
    CHECK(k.rotation.is_valid());
    const double best = squared_cost(rotate(z, k.rotation), y);
    int beaten = 0;
    for (int s = 0; s < 10000; ++s) beaten += squared_cost(rotate(z, random_rotation(rng)), y) < best - 1e-12;
    CHECK(beaten == 0);
  }
  SUBCASE("reflection-related clouds still give a proper rotation") {
    const PointCloud z = project_zero_com(gaussian_cloud(6, rng));
    PointCloud y = z;
    y.col(2) *= -1.0;
    CHECK(kabsch(z, y).rotation.is_valid());
  }
  SUBCASE("collinear clouds are solved exactly") {
    PointCloud z(2, 3), y(2, 3);
    z << -1, 0, 0, 1, 0, 0;
    y << 0, -1, 0, 0, 1, 0;
    const KabschResult k = kabsch(z, y);
    CHECK_FALSE(k.degenerate);
    CHECK(k.rotation.is_valid());
    CHECK(squared_cost(rotate(z, k.rotation), y) < 1e-20);
  }
  SUBCASE("all points at the origin are flagged") {
    const PointCloud z = PointCloud::Zero(3, 3);
    const KabschResult k = kabsch(z, z);
    CHECK(k.degenerate);
    CHECK(k.rotation.matrix == Eigen::Matrix3d::Identity());
  }
}

TEST_CASE("equivariant OT") {
  Rng rng(31);
  SUBCASE("exact alignment is found") {
    for (int n : {3, 6, 12}) {
      const PointCloud z = project_zero_com(gaussian_cloud(n, rng));
      const PointCloud y = apply(z, random_rotation(rng), random_permutation(n, rng));
      // Single ICP starts often stall in a local minimum; enough starts find the exact copy.
      EotOptions opt;
      opt.restarts = 300;
      const EotPlan plan = solve_eot(z, y, opt, rng);
      CHECK(plan.cost < 1e-10);
      CHECK(plan.iterations >= 1);
    }
  }
  SUBCASE("reported cost matches re-evaluation") {
    const PointCloud z = project_zero_com(gaussian_cloud(10, rng));
    const PointCloud y = project_zero_com(gaussian_cloud(10, rng));
    const EotPlan plan = solve_eot(z, y, {}, rng);
    CHECK(plan.cost == doctest::Approx(squared_cost(apply(z, plan.rotation, plan.permutation), y)).epsilon(1e-9));
  }
  SUBCASE("assignment step is exact for the final rotation") {
    const PointCloud z = project_zero_com(gaussian_cloud(6, rng));
    const PointCloud y = project_zero_com(gaussian_cloud(6, rng));
    const EotPlan plan = solve_eot(z, y, {}, rng);
    const Eigen::MatrixXd c = pair_costs(rotate(z, plan.rotation), y);
    CHECK(assignment_total(c, plan.permutation) == doctest::Approx(brute_assignment(c)).epsilon(1e-9));
  }
  SUBCASE("objective never increases within a start") {
    EotOptions opt;
    opt.restarts = 5;
    for (int trial = 0; trial < 20; ++trial) {
      const PointCloud z = project_zero_com(gaussian_cloud(15, rng));
      const PointCloud y = project_zero_com(gaussian_cloud(15, rng));
      EotTrace trace;
      solve_eot(z, y, opt, rng, &trace);
      REQUIRE(trace.objective_by_start.size() == 6);
      for (const auto& obj : trace.objective_by_start)
        for (size_t k = 1; k < obj.size(); ++k) CHECK(obj[k] <= obj[k - 1] + 1e-12);
    }
  }
  SUBCASE("brute force") {
    const PointCloud one = gaussian_cloud(1, rng);
    const EotPlan p1 = brute_force_eot(one, gaussian_cloud(1, rng));
    CHECK(p1.cost < 1e-20);
    CHECK(p1.permutation.mapping == std::vector<int>{0});

    PointCloud pair(2, 3), other(2, 3);
    pair << 1, 0, 0, -1, 0, 0;
    other << 0, 0, 1, 0, 0, -1;
    CHECK(brute_force_eot(pair, other).cost < 1e-20);

    for (int trial = 0; trial < 10; ++trial) {
      const PointCloud z = project_zero_com(gaussian_cloud(6, rng));
      const PointCloud y = project_zero_com(gaussian_cloud(6, rng));
      CHECK(brute_force_eot(z, y).cost <= solve_eot(z, y, {}, rng).cost + 1e-9);
    }
    CHECK_THROWS(brute_force_eot(gaussian_cloud(9, rng), gaussian_cloud(9, rng)));
  }
  SUBCASE("errors") {
    EotOptions bad;
    bad.max_iter = 0;
    CHECK_THROWS(solve_eot(gaussian_cloud(3, rng), gaussian_cloud(3, rng), bad, rng));
    CHECK_THROWS(solve_eot(gaussian_cloud(3, rng), gaussian_cloud(4, rng), {}, rng));
  }
}
