#include <doctest.h>

#include "equifm/geometry.hpp"

#include <cmath>
#include <numbers>

using namespace equifm;

namespace {

PointCloud cloud(std::initializer_list<std::array<double, 3>> rows) {
  PointCloud x(static_cast<Eigen::Index>(rows.size()), 3);
  Eigen::Index i = 0;
  for (const auto& r : rows) x.row(i++) << r[0], r[1], r[2];
  return x;
}

}  // namespace

TEST_CASE("zero-com projection") {
  SUBCASE("a centered cloud is unchanged") {
    const PointCloud x = cloud({{1, 0, 0}, {-1, 0, 0}, {0, 2, -2}, {0, -2, 2}});
    CHECK((project_zero_com(x) - x).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("a single point maps to the origin") {
    CHECK(project_zero_com(cloud({{1, 2, 3}})).norm() == 0.0);
  }
  SUBCASE("two points on the x axis") {
    const PointCloud y = project_zero_com(cloud({{1, 0, 0}, {3, 0, 0}}));
    CHECK(y(0, 0) == doctest::Approx(-1.0));
    CHECK(y(1, 0) == doctest::Approx(1.0));
  }
  SUBCASE("idempotent and mean zero on random input") {
    Rng rng(3);
    const PointCloud x = gaussian_cloud(9, rng) * 5.0;
    const PointCloud y = project_zero_com(x);
    CHECK(center_of_mass(y).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((project_zero_com(y) - y).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("non-finite input is rejected") {
    PointCloud x = cloud({{0, 0, 0}});
    x(0, 1) = std::nan("");
    CHECK_THROWS_AS(project_zero_com(x), GeometryError);
  }
}

TEST_CASE("random rotations") {
  Rng a(1), b(2);
  const Rotation r1 = random_rotation(a);
  const Rotation r2 = random_rotation(b);
  CHECK(r1.is_valid());
  CHECK(r2.is_valid());
  CHECK((r1.matrix - r2.matrix).norm() > 1e-3);

  Rng rng(11);
  Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
  for (int k = 0; k < 10000; ++k) {
    const Rotation r = random_rotation(rng);
    REQUIRE(r.is_valid());
    sum += r.matrix;
  }
  CHECK((sum / 10000.0).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("apply, rotate and permute") {
  const PointCloud x = cloud({{1, 0, 0}});
  CHECK((apply(x, Rotation::identity(), Permutation::identity(1)) - x).norm() == 0.0);

  const PointCloud y = apply(x, axis_angle({0, 0, 1}, std::numbers::pi), Permutation::identity(1));
  CHECK(y(0, 0) == doctest::Approx(-1.0));
  CHECK(std::abs(y(0, 1)) < 1e-15);

  Rng rng(5);
  const PointCloud z = gaussian_cloud(6, rng);
  const Rotation r = random_rotation(rng);
  const Permutation p = random_permutation(6, rng);
  const PointCloud w = apply(z, r, p);
  // Independent evaluation of result[i] = R z[p[i]].
  for (int i = 0; i < 6; ++i) {
    const Eigen::Vector3d expect = r.matrix * z.row(p.mapping[static_cast<size_t>(i)]).transpose();
    CHECK((w.row(i).transpose() - expect).norm() < 1e-12);
  }
  // Undo: permute back with the inverse, then rotate back.
  const PointCloud back = rotate(permute(w, p.inverse()), r.inverse());
  CHECK((back - z).cwiseAbs().maxCoeff() < 1e-12);

  SUBCASE("composition matches sequential application") {
    const Rotation r2 = random_rotation(rng);
    const Permutation p2 = random_permutation(6, rng);
    const PointCloud seq = apply(apply(z, r, p), r2, p2);
    const PointCloud once = apply(z, r2.compose(r), p2.after(p));
    CHECK((seq - once).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("length mismatch") { CHECK_THROWS(apply(z, r, Permutation::identity(5))); }
}

TEST_CASE("permutation validity") {
  CHECK(Permutation{{2, 0, 1}}.is_valid());
  CHECK_FALSE(Permutation{{0, 0, 1}}.is_valid());
  CHECK_FALSE(Permutation{{0, 3}}.is_valid());
  const Permutation p{{2, 0, 1}};
  CHECK(p.after(p.inverse()).mapping == Permutation::identity(3).mapping);
}

TEST_CASE("squared cost") {
  CHECK(squared_cost(cloud({{0, 0, 0}}), cloud({{3, 4, 0}})) == doctest::Approx(25.0));
  Rng rng(8);
  const PointCloud a = gaussian_cloud(7, rng), b = gaussian_cloud(7, rng);
  CHECK(squared_cost(a, a) == 0.0);
  CHECK(squared_cost(a, b) == doctest::Approx(squared_cost(b, a)));
  const Rotation r = random_rotation(rng);
  CHECK(squared_cost(rotate(a, r), rotate(b, r)) == doctest::Approx(squared_cost(a, b)).epsilon(1e-9));
  CHECK_THROWS(squared_cost(a, gaussian_cloud(6, rng)));
}
