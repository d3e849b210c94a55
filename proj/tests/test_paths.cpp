#include <doctest.h>

#include "equifm/paths.hpp"

#include <cmath>

using namespace equifm;

namespace {

const NoiseSchedule kSchedules[] = {NoiseSchedule::linear(), NoiseSchedule::cosine(), NoiseSchedule::polynomial()};

Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

}  // namespace

TEST_CASE("noise schedules") {
  SUBCASE("linear closed form") {
    const NoiseSchedule s = NoiseSchedule::linear();
    CHECK(s.alpha(0.0) == 1.0);
    // T(1) = integral of 0.1 + 19.9 t over [0, 1] = 0.1 + 9.95 = 10.05.
    CHECK(s.alpha(1.0) == doctest::Approx(std::exp(-10.05 / 2.0)).epsilon(1e-14));
    CHECK(s.alpha(1.0) < 1e-2);
  }
  SUBCASE("cosine and polynomial endpoints") {
    for (const NoiseSchedule& s : {NoiseSchedule::cosine(), NoiseSchedule::polynomial()}) {
      CHECK(std::abs(s.alpha(0.0) - 1.0) < 1e-3);
      CHECK(s.alpha(1.0) < 1e-3);
      CHECK(s.alpha(1.0) >= 0.0);
    }
  }
  for (const NoiseSchedule& s : kSchedules) {
    CAPTURE(to_string(s.kind()));
    double prev = 2.0;
    for (int i = 0; i <= 1000; ++i) {
      const double t = i / 1000.0;
      const double a = s.alpha(t);
      CHECK(a < prev);
      prev = a;
      if (i > 0 && i < 1000) {
        CHECK(a > 0.0);
        CHECK(a < 1.0);
        CHECK(s.alpha_prime(t) < 0.0);
      }
    }
    // Central differences on a 100-point interior grid.
    for (int i = 1; i <= 100; ++i) {
      const double t = i / 101.0, h = 1e-6;
      const double fd = (s.alpha(t + h) - s.alpha(t - h)) / (2 * h);
      CHECK(std::abs(fd - s.alpha_prime(t)) <= 1e-5 * std::abs(s.alpha_prime(t)));
    }
    double prev_snr = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 1000; ++i) {
      const double snr = s.snr(i / 1000.0);
      CHECK(snr < prev_snr);
      prev_snr = snr;
    }
    CHECK_THROWS_AS(s.snr(0.0), PathError);
    CHECK_THROWS_AS(s.alpha(1.5), PathError);
    CHECK_THROWS_AS(s.alpha(-0.1), PathError);
  }
  SUBCASE("snr at alpha = sqrt(1/2) is one") {
    // Cosine schedule: alpha^2 = 1/2 where the angle is pi/4.
    const double off = 0.008;
    const double t = 0.5 * (1.0 + off) - off;
    CHECK(NoiseSchedule::cosine(off).snr(t) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("names round trip") {
    for (auto k : {ScheduleKind::Linear, ScheduleKind::Cosine, ScheduleKind::Polynomial})
      CHECK(parse_schedule_kind(to_string(k)) == k);
    CHECK_THROWS(parse_schedule_kind("sigmoid"));
  }
}

TEST_CASE("OT path") {
  CHECK(ot_interpolate(scalar(1), scalar(2), 0.5, 0.0)(0, 0) == doctest::Approx(1.5));
  CHECK(ot_interpolate(scalar(7), scalar(2), 0.0, 0.0)(0, 0) == 2.0);
  CHECK(ot_interpolate(scalar(7), scalar(2), 1.0, 1e-4)(0, 0) == doctest::Approx(7.0));
  CHECK(ot_target_field(scalar(1), scalar(2), 0.0)(0, 0) == doctest::Approx(-1.0));
  CHECK(ot_target_field(scalar(3), scalar(0), 0.0)(0, 0) == 3.0);
  CHECK(ot_target_field(scalar(3), scalar(3), 0.0)(0, 0) == 0.0);
  CHECK_THROWS_AS(ot_interpolate(Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(3, 3), 0.5, 0.0), PathError);

  Rng rng(2);
  const PointCloud x1 = gaussian_cloud(5, rng), x0 = gaussian_cloud(5, rng);
  const double s = 1e-4;
  // The target equals the time derivative of the flow, at every t.
  for (double t : {0.1, 0.4, 0.9}) {
    const double h = 1e-6;
    const Eigen::MatrixXd fd = (ot_interpolate(x1, x0, t + h, s) - ot_interpolate(x1, x0, t - h, s)) / (2 * h);
    CHECK((fd - ot_target_field(x1, x0, s)).cwiseAbs().maxCoeff() < 1e-8);
  }
  // Straightness: x_t - x_0-endpoint is parallel to the endpoint difference.
  const Eigen::MatrixXd a = ot_interpolate(x1, x0, 0.0, s), b = ot_interpolate(x1, x0, 1.0, s);
  for (double t : {0.25, 0.5, 0.75}) {
    const Eigen::MatrixXd r = ot_interpolate(x1, x0, t, s) - a - t * (b - a);
    CHECK(r.cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("VP path") {
  const NoiseSchedule lin = NoiseSchedule::linear();
  Rng rng(6);
  const PointCloud x0 = gaussian_cloud(4, rng), eps = gaussian_cloud(4, rng);
  CHECK((vp_sample(x0, 0.0, lin, eps) - x0).norm() == 0.0);
  CHECK((vp_sample(x0, 1.0, lin, eps) - eps).cwiseAbs().maxCoeff() < 0.05);

  SUBCASE("hand-evaluated sample") {
    // alpha = 0.6 on the polynomial schedule: (1 - 2p)(1 - t^2) + p = 0.6.
    const NoiseSchedule poly = NoiseSchedule::polynomial();
    const double p = poly.precision();
    const double t = std::sqrt(1.0 - (0.6 - p) / (1.0 - 2.0 * p));
    REQUIRE(poly.alpha(t) == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(vp_sample(scalar(2), t, poly, scalar(1))(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("hand-evaluated target field") {
    // alpha = 0.6, alpha' = -1, x = 1, x0 = 2: (-1 / 0.64)(2 - 0.6) = -2.1875.
    // The field is linear in alpha', so dividing by -alpha'(t) emulates alpha' = -1.
    const NoiseSchedule poly = NoiseSchedule::polynomial();
    const double p = poly.precision();
    const double t = std::sqrt(1.0 - (0.6 - p) / (1.0 - 2.0 * p));
    const double u = vp_target_field(scalar(1), scalar(2), t, poly)(0, 0);
    CHECK(u / -poly.alpha_prime(t) == doctest::Approx(-2.1875).epsilon(1e-12));
  }
  SUBCASE("zero on the noiseless ray") {
    const double t = 0.3;
    const Eigen::MatrixXd x = x0 / lin.alpha(t);
    CHECK(vp_target_field(x, x0, t, lin).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("matches the time derivative of the flow at fixed noise") {
    for (const NoiseSchedule& s : kSchedules) {
      for (double t : {0.05, 0.3, 0.6, 0.9}) {
        const double h = 1e-6;
        const Eigen::MatrixXd fd = (vp_sample(x0, t + h, s, eps) - vp_sample(x0, t - h, s, eps)) / (2 * h);
        const Eigen::MatrixXd u = vp_target_field(vp_sample(x0, t, s, eps), x0, t, s);
        CHECK((fd - u).cwiseAbs().maxCoeff() < 1e-4);
      }
    }
  }
  SUBCASE("guard near t = 0") {
    CHECK_THROWS_AS(vp_target_field(x0, x0, 1e-6, lin), PathError);
    CHECK_NOTHROW(vp_target_field(x0, x0, kVpMinTime, lin));
  }
  SUBCASE("prior variance at t = 1") {
    std::normal_distribution<double> n(0.0, 1.0);
    const double a = lin.alpha(1.0);
    double sum = 0, sum2 = 0;
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) {
      const double v = vp_sample(scalar(1.5), 1.0, lin, scalar(n(rng)))(0, 0);
      sum += v;
      sum2 += v * v;
    }
    const double var = sum2 / draws - (sum / draws) * (sum / draws);
    CHECK(std::abs(var / (1.0 - a * a) - 1.0) < 0.05);
  }
}

TEST_CASE("EOT training pair") {
  Rng rng(12);
  const double s = 1e-4;
  SUBCASE("identity plan reduces to the OT path") {
    const PointCloud x1 = project_zero_com(gaussian_cloud(5, rng)), x0 = project_zero_com(gaussian_cloud(5, rng));
    EotPlan id{Permutation::identity(5), Rotation::identity(), 0.0, 1};
    const EotPair p = eot_training_pair(x1, x0, 0.3, s, id);
    CHECK((p.x_t - ot_interpolate(x1, x0, 0.3, s)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((p.u_x - ot_target_field(x1, x0, s)).cwiseAbs().maxCoeff() < 1e-14);
    const EotPair p0 = eot_training_pair(x1, x0, 0.0, s, id);
    CHECK((p0.x_t - x0).cwiseAbs().maxCoeff() < 1e-3);
  }
  SUBCASE("aligned targets are shorter on average") {
    double eot_norm = 0, id_norm = 0;
    for (int k = 0; k < 100; ++k) {
      const PointCloud x1 = project_zero_com(gaussian_cloud(8, rng)), x0 = project_zero_com(gaussian_cloud(8, rng));
      const EotPlan plan = solve_eot(x1, x0, {}, rng);
      EotPlan id{Permutation::identity(8), Rotation::identity(), 0.0, 1};
      eot_norm += eot_training_pair(x1, x0, 0.5, s, plan).u_x.norm();
      id_norm += eot_training_pair(x1, x0, 0.5, s, id).u_x.norm();
    }
    CHECK(eot_norm < id_norm);
  }
  SUBCASE("rotating the prior draw leaves the pair unchanged") {
    // The exhaustive plan is a global optimum, so the identity holds exactly.
    for (int k = 0; k < 10; ++k) {
      const PointCloud x1 = project_zero_com(gaussian_cloud(6, rng)), x0 = project_zero_com(gaussian_cloud(6, rng));
      const EotPair a = eot_training_pair(x1, x0, 0.4, s, brute_force_eot(x1, x0));
      const PointCloud x1r = rotate(x1, random_rotation(rng));
      const EotPair b = eot_training_pair(x1r, x0, 0.4, s, brute_force_eot(x1r, x0));
      CHECK((a.x_t - b.x_t).cwiseAbs().maxCoeff() < 1e-6);
      CHECK((a.u_x - b.u_x).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
  SUBCASE("size mismatch") {
    EotPlan id{Permutation::identity(4), Rotation::identity(), 0.0, 1};
    CHECK_THROWS_AS(eot_training_pair(gaussian_cloud(5, rng), gaussian_cloud(5, rng), 0.5, s, id), PathError);
  }
}

TEST_CASE("hybrid training sample") {
  Rng rng(40);
  MoleculeGeometry g0;
  g0.coords = project_zero_com(gaussian_cloud(5, rng));
  g0.features = Eigen::MatrixXd::Zero(5, 6);
  for (int i = 0; i < 5; ++i) g0.features(i, i % 5) = 1.0;
  g0.features(2, 5) = -1.0;
  const HybridPath hp;  // EOT on x, linear VP on h
  const EotOptions eot;

  SUBCASE("hand-stepped reference") {
    const double t = 0.37;
    Rng a(99), b(99);
    const TrainingSample got = hybrid_training_sample(g0, t, hp, eot, a);

    std::normal_distribution<double> normal(0.0, 1.0);
    PointCloud ex(5, 3);
    for (int i = 0; i < 5; ++i)
      for (int k = 0; k < 3; ++k) ex(i, k) = normal(b);
    Eigen::MatrixXd eh(5, 6);
    for (int i = 0; i < 5; ++i)
      for (int k = 0; k < 6; ++k) eh(i, k) = normal(b);
    ex.rowwise() -= ex.colwise().mean();
    const EotPlan plan = solve_eot(ex, g0.coords, eot, b);
    const PointCloud aligned = apply(ex, plan.rotation, plan.permutation);
    const double s = hp.path_x.sigma_min;
    const PointCloud xt = (s + (1 - s) * t) * aligned + (1 - t) * g0.coords;
    const PointCloud ux = (1 - s) * aligned - g0.coords;
    const double al = std::exp(-0.5 * (0.1 * t + 0.5 * 19.9 * t * t));
    const double alp = -0.5 * (0.1 + 19.9 * t) * al;
    const Eigen::MatrixXd ht = al * g0.features + std::sqrt(1 - al * al) * eh;
    const Eigen::MatrixXd uh = alp / (1 - al * al) * (g0.features - al * ht);

    CHECK((got.g_t.coords - xt).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((got.u_x - ux).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((got.g_t.features - ht).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((got.u_h - uh).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(got.eot_iterations == plan.iterations);
  }
  SUBCASE("coordinates stay centered for every path") {
    HybridPath vp_x;
    vp_x.path_x = ConditionalPath::vp(NoiseSchedule::cosine());
    for (const HybridPath& p : {hp, vp_x}) {
      for (double t : {1e-5, 0.2, 0.7, 1.0}) {
        const TrainingSample smp = hybrid_training_sample(g0, t, p, eot, rng);
        CHECK(center_of_mass(smp.g_t.coords).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(center_of_mass(smp.u_x).cwiseAbs().maxCoeff() < 1e-9);
      }
    }
  }
  SUBCASE("near t = 0 the geometry is the data") {
    const TrainingSample smp = hybrid_training_sample(g0, kVpMinTime, hp, eot, rng);
    CHECK((smp.g_t.coords - g0.coords).cwiseAbs().maxCoeff() < 1e-3);
    CHECK((smp.g_t.features - g0.features).cwiseAbs().maxCoeff() < 0.05);
  }
  SUBCASE("feature noise does not touch the coordinate targets") {
    const PointCloud ex = gaussian_cloud(5, rng);
    const Eigen::MatrixXd eh1 = Eigen::MatrixXd::Random(5, 6), eh2 = Eigen::MatrixXd::Random(5, 6);
    Rng r1(5), r2(5);
    const TrainingSample a = hybrid_training_sample_from_noise(g0, 0.5, hp, ex, eh1, eot, r1);
    const TrainingSample b = hybrid_training_sample_from_noise(g0, 0.5, hp, ex, eh2, eot, r2);
    CHECK(a.g_t.coords == b.g_t.coords);
    CHECK(a.u_x == b.u_x);
    CHECK_FALSE(a.u_h == b.u_h);
  }
  SUBCASE("invalid requests") {
    CHECK_THROWS_AS(hybrid_training_sample(g0, 1.5, hp, eot, rng), PathError);
    HybridPath bad;
    bad.path_h = ConditionalPath::eot();
    CHECK_THROWS_AS(hybrid_training_sample(g0, 0.5, bad, eot, rng), PathError);
    ConditionalPath wide = ConditionalPath::ot(0.5);
    CHECK_THROWS_AS(wide.validate(), PathError);
  }
}
