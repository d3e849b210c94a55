#include <doctest.h>

#include "equifm/config.hpp"

using namespace equifm;

TEST_CASE("run config") {
  SUBCASE("defaults") {
    const RunConfig c;
    CHECK(c.learning_rate == 1e-4);
    CHECK(c.integrator_spec().method == IntegratorMethod::Dopri5);
    CHECK(c.hybrid_path().path_x.kind == PathKind::EOT);
  }
  SUBCASE("json values and overrides") {
    RunConfig c = RunConfig::from_json_text(R"({"steps": 10, "integrator": "rk4", "bench_sizes": [3, 4]})");
    CHECK(c.steps == 10);
    CHECK(c.integrator_spec().n_steps == 50);
    CHECK(c.bench_sizes == std::vector<int>{3, 4});
    c.set("learning_rate", "0.001");
    c.set("bench_sizes", "18,150");
    c.set("dataset", "mols.xyz");
    CHECK(c.learning_rate == 1e-3);
    CHECK(c.bench_sizes == std::vector<int>{18, 150});
    CHECK(c.dataset == "mols.xyz");
    const RunConfig back = RunConfig::from_json_text(c.to_json_text());
    CHECK(back.to_json_text() == c.to_json_text());
  }
  SUBCASE("fail closed") {
    CHECK_THROWS_AS(RunConfig::from_json_text(R"({"stepz": 10})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_text(R"({"steps": "ten"})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_text(R"({"steps": 1.5})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_text(R"({"seed": -1})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_text("[1, 2]"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_text("{"), ConfigError);
    RunConfig c;
    CHECK_THROWS_AS(c.set("nope", "1"), ConfigError);
    CHECK_THROWS_AS(c.set("bench_sizes", "1,x"), ConfigError);
    c.set("path_h", "eot");
    CHECK_THROWS_AS(c.hybrid_path(), ConfigError);
    c = RunConfig{};
    c.set("integrator", "leapfrog");
    CHECK_THROWS_AS(c.integrator_spec(), ConfigError);
  }
}
