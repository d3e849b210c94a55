#include "equifm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace equifm {

int FeatureLayout::type_index(const std::string& symbol) const {
  const auto it = std::find(symbols.begin(), symbols.end(), symbol);
  return it == symbols.end() ? -1 : static_cast<int>(it - symbols.begin());
}

MoleculeGeometry encode(const std::vector<int>& types, const std::vector<int>& charges, const PointCloud& coords,
                        const FeatureLayout& layout) {
  const int n = static_cast<int>(types.size());
  if (coords.rows() != n || static_cast<int>(charges.size()) != n)
    throw DataError("encode: " + std::to_string(n) + " types, " + std::to_string(charges.size()) + " charges, " +
                    std::to_string(coords.rows()) + " coordinates");
  MoleculeGeometry g;
  g.coords = project_zero_com(coords);
  g.features = Eigen::MatrixXd::Zero(n, layout.dim());
  for (int i = 0; i < n; ++i) {
    const int type = types[static_cast<size_t>(i)];
    if (type < 0 || type >= layout.n_types())
      throw DataError("encode: atom type index " + std::to_string(type) + " is outside the layout");
    g.features(i, type) = 1.0;
    if (layout.charge_channel) g.features(i, layout.charge_column()) = charges[static_cast<size_t>(i)];
  }
  return g;
}

MoleculeGeometry encode(const Molecule& mol, const FeatureLayout& layout) {
  return encode(mol.types, mol.charges, mol.coords, layout);
}

Dataset Dataset::from_molecules(const std::vector<Molecule>& mols, const FeatureLayout& layout) {
  Dataset ds;
  ds.layout = layout;
  ds.molecules.reserve(mols.size());
  for (const Molecule& m : mols) {
    ds.molecules.push_back(encode(m, layout));
    ++ds.size_histogram[m.n_atoms()];
  }
  return ds;
}

Molecule Dataset::molecule(int i) const {
  const MoleculeGeometry& g = molecules.at(static_cast<size_t>(i));
  Molecule m;
  m.coords = g.coords;
  for (int a = 0; a < g.n_nodes(); ++a) {
    Eigen::Index best = 0;
    g.features.row(a).head(layout.n_types()).maxCoeff(&best);
    m.types.push_back(static_cast<int>(best));
    m.charges.push_back(layout.charge_channel ? static_cast<int>(std::lround(g.features(a, layout.charge_column()))) : 0);
  }
  return m;
}

namespace {

[[noreturn]] void fail(const std::string& source, int line, const std::string& message) {
  throw DataError(source + ":" + std::to_string(line) + ": " + message);
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

double parse_number(const std::string& token, const std::string& source, int line, const char* what) {
  try {
    size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size() || !std::isfinite(v)) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    fail(source, line, std::string("non-numeric ") + what + " '" + token + "'");
  }
}

}  // namespace

std::vector<Molecule> parse_xyz(const std::string& text, const FeatureLayout& layout, const std::string& source) {
  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }

  std::vector<Molecule> out;
  size_t pos = 0;
  while (true) {
    while (pos < lines.size() && blank(lines[pos])) ++pos;
    if (pos >= lines.size()) break;
    const int count_line = static_cast<int>(pos) + 1;
    std::istringstream count_in(lines[pos]);
    long long count = 0;
    std::string extra;
    if (!(count_in >> count) || (count_in >> extra) || count < 1)
      fail(source, count_line, "malformed atom count '" + lines[pos] + "'");
    pos += 2;  // count line + comment line
    Molecule mol;
    mol.coords.resize(count, 3);
    for (long long a = 0; a < count; ++a, ++pos) {
      const int line_no = static_cast<int>(pos) + 1;
      if (pos >= lines.size()) fail(source, line_no, "expected " + std::to_string(count) + " atom rows, file ended");
      std::istringstream row(lines[pos]);
      std::vector<std::string> tok;
      std::string s;
      while (row >> s) tok.push_back(s);
      if (tok.size() < 4 || tok.size() > 5) fail(source, line_no, "expected 'Symbol x y z [charge]'");
      const int type = layout.type_index(tok[0]);
      if (type < 0) fail(source, line_no, "unknown element symbol '" + tok[0] + "'");
      for (int k = 0; k < 3; ++k)
        mol.coords(a, k) = parse_number(tok[static_cast<size_t>(k) + 1], source, line_no, "coordinate");
      int charge = 0;
      if (tok.size() == 5) {
        const double c = parse_number(tok[4], source, line_no, "charge");
        if (c != std::round(c)) fail(source, line_no, "charge '" + tok[4] + "' is not an integer");
        charge = static_cast<int>(c);
      }
      mol.types.push_back(type);
      mol.charges.push_back(charge);
    }
    project_zero_com_inplace(mol.coords);
    out.push_back(std::move(mol));
  }
  return out;
}

std::vector<Molecule> read_xyz_molecules(const std::filesystem::path& path, const FeatureLayout& layout) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_xyz(buffer.str(), layout, path.string());
}

Dataset read_xyz(const std::filesystem::path& path, const FeatureLayout& layout) {
  return Dataset::from_molecules(read_xyz_molecules(path, layout), layout);
}

std::string format_xyz(const std::vector<Molecule>& mols, const FeatureLayout& layout) {
  std::string out;
  char buf[160];
  for (size_t m = 0; m < mols.size(); ++m) {
    const Molecule& mol = mols[m];
    const bool charged = std::any_of(mol.charges.begin(), mol.charges.end(), [](int c) { return c != 0; });
    out += std::to_string(mol.n_atoms()) + "\n";
    out += "molecule " + std::to_string(m) + "\n";
    for (int a = 0; a < mol.n_atoms(); ++a) {
      const std::string& sym = layout.symbols.at(static_cast<size_t>(mol.types[static_cast<size_t>(a)]));
      // +0.0 folds negative zero so output is stable across round trips.
      std::snprintf(buf, sizeof buf, "%-2s %12.6f %12.6f %12.6f", sym.c_str(), mol.coords(a, 0) + 0.0,
                    mol.coords(a, 1) + 0.0, mol.coords(a, 2) + 0.0);
      out += buf;
      if (charged) out += " " + std::to_string(mol.charges[static_cast<size_t>(a)]);
      out += "\n";
    }
  }
  return out;
}

void write_xyz(const std::vector<Molecule>& mols, const std::filesystem::path& path, const FeatureLayout& layout) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << format_xyz(mols, layout);
  if (!out) throw DataError("write failed for " + path.string());
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Unit vector at polar angle `polar` from -z and azimuth `azimuth`.
Eigen::RowVector3d down_cone(double polar, double azimuth) {
  return {std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth), -std::cos(polar)};
}

// Polar angle for three equal bonds below a center with H-X-H angle `bond_angle`.
double umbrella_polar(double bond_angle) {
  return std::asin(std::sqrt((1.0 - std::cos(bond_angle)) / 1.5));
}

}  // namespace

Molecule toy_template(int n_atoms, const FeatureLayout& layout) {
  const auto idx = [&](const char* s) {
    const int i = layout.type_index(s);
    if (i < 0) throw DataError(std::string("toy templates need element ") + s + " in the layout");
    return i;
  };
  Molecule m;
  std::vector<Eigen::RowVector3d> pts;
  switch (n_atoms) {
    case 3: {  // H2O
      const double half = 0.5 * 104.5 * kDeg;
      pts = {{0, 0, 0}, {0.96 * std::sin(half), 0.96 * std::cos(half), 0}, {-0.96 * std::sin(half), 0.96 * std::cos(half), 0}};
      m.types = {idx("O"), idx("H"), idx("H")};
      break;
    }
    case 4: {  // NH3
      const double polar = umbrella_polar(107.0 * kDeg);
      pts = {{0, 0, 0}};
      for (int k = 0; k < 3; ++k) pts.push_back(1.01 * down_cone(polar, 2.0 * std::numbers::pi * k / 3.0));
      m.types = {idx("N"), idx("H"), idx("H"), idx("H")};
      break;
    }
    case 5: {  // CH3F
      const double polar = umbrella_polar(110.5 * kDeg);
      pts = {{0, 0, 0}, {0, 0, 1.35}};
      for (int k = 0; k < 3; ++k) pts.push_back(1.09 * down_cone(polar, 2.0 * std::numbers::pi * k / 3.0));
      m.types = {idx("C"), idx("F"), idx("H"), idx("H"), idx("H")};
      break;
    }
    case 6: {  // CH3OH, staggered
      const double polar = umbrella_polar(std::acos(-1.0 / 3.0));
      const double coh = 108.5 * kDeg;
      pts = {{0, 0, 0}, {0, 0, 1.43}};
      for (int k = 0; k < 3; ++k) pts.push_back(1.09 * down_cone(polar, std::numbers::pi / 3.0 + 2.0 * std::numbers::pi * k / 3.0));
      pts.push_back(Eigen::RowVector3d(0, 0, 1.43) + 0.96 * Eigen::RowVector3d(std::sin(coh), 0, -std::cos(coh)));
      m.types = {idx("C"), idx("O"), idx("H"), idx("H"), idx("H"), idx("H")};
      break;
    }
    default: throw DataError("toy templates exist for 3 to 6 atoms, not " + std::to_string(n_atoms));
  }
  m.coords.resize(n_atoms, 3);
  for (int i = 0; i < n_atoms; ++i) m.coords.row(i) = pts[static_cast<size_t>(i)];
  project_zero_com_inplace(m.coords);
  m.charges.assign(static_cast<size_t>(n_atoms), 0);
  return m;
}

Dataset synthetic_toy_dataset(int n_molecules, std::uint64_t seed, const FeatureLayout& layout) {
  if (n_molecules < 1) throw DataError("synthetic_toy_dataset needs at least one molecule");
  Rng rng(seed);
  std::uniform_int_distribution<int> size_dist(3, 6);
  std::normal_distribution<double> jitter(0.0, kToyJitterSigma);
  std::vector<Molecule> mols;
  mols.reserve(static_cast<size_t>(n_molecules));
  for (int m = 0; m < n_molecules; ++m) {
    const Molecule tmpl = toy_template(size_dist(rng), layout);
    Molecule mol = tmpl;
    for (int i = 0; i < mol.n_atoms(); ++i) {
      Eigen::RowVector3d d(jitter(rng), jitter(rng), jitter(rng));
      if (d.norm() > kToyJitterMaxNorm) d *= kToyJitterMaxNorm / d.norm();
      mol.coords.row(i) += d;
    }
    mol.coords = rotate(mol.coords, random_rotation(rng));
    const Permutation p = random_permutation(mol.n_atoms(), rng);
    mol.coords = permute(mol.coords, p);
    for (int i = 0; i < mol.n_atoms(); ++i) {
      mol.types[static_cast<size_t>(i)] = tmpl.types[static_cast<size_t>(p.mapping[static_cast<size_t>(i)])];
      mol.charges[static_cast<size_t>(i)] = tmpl.charges[static_cast<size_t>(p.mapping[static_cast<size_t>(i)])];
    }
    project_zero_com_inplace(mol.coords);
    mols.push_back(std::move(mol));
  }
  return Dataset::from_molecules(mols, layout);
}

std::string size_histogram_csv(const Dataset& ds) {
  std::string out = "n_nodes,count\n";
  for (const auto& [n, c] : ds.size_histogram) out += std::to_string(n) + "," + std::to_string(c) + "\n";
  return out;
}

}  // namespace equifm
