#include <doctest.h>

#include "equifm/data.hpp"
#include "equifm/sampling.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

using namespace equifm;

namespace {

std::vector<double> sorted_distances(const PointCloud& x) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) d.push_back((x.row(i) - x.row(j)).norm());
  std::sort(d.begin(), d.end());
  return d;
}

}  // namespace

TEST_CASE("xyz parsing") {
  SUBCASE("single atom") {
    const auto mols = parse_xyz("1\nhydrogen\nH 0 0 0\n");
    REQUIRE(mols.size() == 1);
    CHECK(mols[0].n_atoms() == 1);
    CHECK(mols[0].types[0] == 0);
  }
  SUBCASE("several frames with a charge column") {
    const auto mols = parse_xyz("2\na\nC 0 0 0\nO 0 0 1.2\n3\nb\nN 0 0 0 1\nH 1 0 0 0\nH 0 1 0 0\n");
    REQUIRE(mols.size() == 2);
    CHECK(mols[1].charges == std::vector<int>{1, 0, 0});
    CHECK(center_of_mass(mols[0].coords).norm() < 1e-12);
  }
  SUBCASE("errors name the line") {
    auto message = [](const std::string& text) {
      try {
        parse_xyz(text, {}, "f.xyz");
      } catch (const DataError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(message("1\nc\nXx 0 0 0\n") == "f.xyz:3: unknown element symbol 'Xx'");
    CHECK(message("two\nc\nH 0 0 0\n").rfind("f.xyz:1:", 0) == 0);
    CHECK(message("1\nc\nH 0 zero 0\n").rfind("f.xyz:3:", 0) == 0);
    CHECK(message("2\nc\nH 0 0 0\n").rfind("f.xyz:4:", 0) == 0);
  }
}

TEST_CASE("xyz round trip") {
  const std::string text =
      "3\nwater\nO 0.1 0.2 0.3\nH 0.9 0.2 0.3\nH -0.1 1.1 0.25\n"
      "2\nion pair\nN 0 0 0 1\nO 1.3 0 0 -1\n";
  const auto first = parse_xyz(text);
  const std::string normalized = format_xyz(first);
  const auto second = parse_xyz(normalized);
  CHECK(format_xyz(second) == normalized);
  for (size_t m = 0; m < first.size(); ++m) {
    CHECK(first[m].types == second[m].types);
    CHECK(first[m].charges == second[m].charges);
    CHECK((first[m].coords - second[m].coords).cwiseAbs().maxCoeff() <= 5e-7 + 1e-12);
  }
  const auto path = std::filesystem::temp_directory_path() / "equifm_roundtrip.xyz";
  write_xyz(first, path);
  CHECK(format_xyz(read_xyz_molecules(path)) == normalized);
  std::filesystem::remove(path);
}

TEST_CASE("encoding") {
  const FeatureLayout layout;
  CHECK(layout.type_index("C") == 1);
  CHECK(layout.symbols == std::vector<std::string>{"H", "C", "N", "O", "F"});
  PointCloud x(2, 3);
  x << 0, 0, 0, 2, 0, 0;
  const MoleculeGeometry g = encode({1, 3}, {0, -1}, x, layout);
  CHECK(g.features(0, 1) == 1.0);
  CHECK(g.features.row(0).head(5).sum() == 1.0);
  CHECK(g.features(1, 5) == -1.0);
  CHECK(center_of_mass(g.coords).norm() < 1e-12);
  CHECK_THROWS_AS(encode({7, 0}, {0, 0}, x, layout), DataError);

  SUBCASE("discretizing an encoding recovers it") {
    for (int type = 0; type < 5; ++type) {
      for (int charge : {-2, -1, 0, 1, 2}) {
        PointCloud one(1, 3);
        one.setZero();
        const DiscreteFeatures f = discretize_features(encode({type}, {charge}, one).features, layout);
        CHECK(f.types[0] == type);
        CHECK(f.charges[0] == charge);
      }
    }
  }
  SUBCASE("distinct (type, charge) pairs get distinct encodings") {
    std::set<std::vector<double>> seen;
    PointCloud one = PointCloud::Zero(1, 3);
    for (int type = 0; type < 5; ++type)
      for (int charge = -2; charge <= 2; ++charge) {
        const Eigen::RowVectorXd r = encode({type}, {charge}, one).features.row(0);
        seen.insert(std::vector<double>(r.data(), r.data() + r.size()));
      }
    CHECK(seen.size() == 25);
  }
}

TEST_CASE("synthetic toy dataset") {
  const Dataset a = synthetic_toy_dataset(200, 17);
  const Dataset b = synthetic_toy_dataset(200, 17);
  REQUIRE(a.size() == 200);
  for (int i = 0; i < a.size(); ++i) {
    CHECK(a.molecules[static_cast<size_t>(i)].coords == b.molecules[static_cast<size_t>(i)].coords);
    CHECK(a.molecules[static_cast<size_t>(i)].features == b.molecules[static_cast<size_t>(i)].features);
  }
  int total = 0;
  for (const auto& [n, c] : a.size_histogram) {
    CHECK(n >= 3);
    CHECK(n <= 6);
    total += c;
  }
  CHECK(total == a.size());

  // Each atom moves by at most the jitter bound, so every pairwise distance
  // (and therefore every order statistic) moves by at most twice that.
  for (int i = 0; i < a.size(); ++i) {
    const MoleculeGeometry& g = a.molecules[static_cast<size_t>(i)];
    CHECK(center_of_mass(g.coords).norm() < 1e-9);
    const auto d = sorted_distances(g.coords);
    const auto ref = sorted_distances(toy_template(g.n_nodes()).coords);
    for (size_t k = 0; k < d.size(); ++k) CHECK(std::abs(d[k] - ref[k]) <= 2 * kToyJitterMaxNorm + 1e-12);
    // Types are fixed by the template: same multiset of elements.
    auto types = a.molecule(i).types;
    auto ref_types = toy_template(g.n_nodes()).types;
    std::sort(types.begin(), types.end());
    std::sort(ref_types.begin(), ref_types.end());
    CHECK(types == ref_types);
  }
  CHECK_THROWS_AS(synthetic_toy_dataset(0, 1), DataError);
  CHECK(size_histogram_csv(a).rfind("n_nodes,count\n", 0) == 0);
}
