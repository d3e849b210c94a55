#include "equifm/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#ifndef EQUIFM_DATA_DIR
#define EQUIFM_DATA_DIR "data"
#endif

namespace equifm {

namespace {

std::pair<std::string, std::string> key(const std::string& a, const std::string& b) {
  return a <= b ? std::make_pair(a, b) : std::make_pair(b, a);
}

[[noreturn]] void fail(const std::string& source, int line, const std::string& msg) {
  throw MetricsError(source + ":" + std::to_string(line) + ": " + msg);
}

std::vector<double> read_numbers(std::istringstream& in, const std::string& source, int line) {
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      fail(source, line, "expected a number, got '" + tok + "'");
    }
  }
  return out;
}

}  // namespace

BondTable BondTable::parse(const std::string& text, const std::string& source) {
  BondTable t;
  std::istringstream lines(text);
  std::string raw;
  int line_no = 0;
  bool have_version = false;
  bool margin_rule = false;
  std::vector<double> margins;
  while (std::getline(lines, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream in(raw);
    std::string word;
    if (!(in >> word)) continue;
    if (word == "version") {
      int v = 0;
      if (!(in >> v) || v != 1) fail(source, line_no, "unsupported bond table version");
      have_version = true;
      continue;
    }
    if (!have_version) fail(source, line_no, "the first directive must be 'version 1'");
    if (word == "rule") {
      std::string name;
      in >> name;
      if (name == "midpoint") {
        margin_rule = false;
        if (!read_numbers(in, source, line_no).empty()) fail(source, line_no, "'rule midpoint' takes no values");
      } else if (name == "margins") {
        margins = read_numbers(in, source, line_no);
        if (margins.size() != 3) fail(source, line_no, "'rule margins' needs single, double and triple margins");
        margin_rule = true;
      } else {
        fail(source, line_no, "unknown rule '" + name + "' (expected midpoint or margins)");
      }
    } else if (word == "lengths" || word == "cuts") {
      std::string a, b;
      if (!(in >> a >> b)) fail(source, line_no, "expected two element symbols");
      const auto v = read_numbers(in, source, line_no);
      if (v.empty() || v.size() > 3) fail(source, line_no, "expected 1 to 3 values");
      for (double x : v)
        if (!(x > 0.0)) fail(source, line_no, "lengths must be positive");
      BondCuts c;
      if (word == "cuts") {
        c.single = v[0];
        if (v.size() > 1) c.double_bond = v[1];
        if (v.size() > 2) c.triple = v[2];
      } else if (margin_rule) {
        c.single = v[0] + margins[0];
        if (v.size() > 1) c.double_bond = v[1] + margins[1];
        if (v.size() > 2) c.triple = v[2] + margins[2];
      } else {
        c.single = 1.1 * v[0];
        if (v.size() > 1) c.double_bond = 0.5 * (v[0] + v[1]);
        if (v.size() > 2) c.triple = 0.5 * (v[1] + v[2]);
      }
      t.set_cuts(a, b, c);
    } else if (word == "valency") {
      std::string sym;
      int charge = 0;
      if (!(in >> sym >> charge)) fail(source, line_no, "expected 'valency SYMBOL CHARGE VALUE...'");
      std::vector<int> allowed;
      int v = 0;
      while (in >> v) allowed.push_back(v);
      if (!in.eof() || allowed.empty()) fail(source, line_no, "expected integer valencies");
      t.add_valency(sym, charge, allowed);
    } else {
      fail(source, line_no, "unknown directive '" + word + "'");
    }
  }
  if (!have_version) throw MetricsError(source + ": missing version line");
  try {
    t.validate();
  } catch (const MetricsError& e) {
    throw MetricsError(source + ": " + e.what());
  }
  return t;
}

BondTable BondTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MetricsError("cannot open bond table " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

BondTable BondTable::shipped() { return load(std::filesystem::path(EQUIFM_DATA_DIR) / "bond_table_v1.txt"); }
BondTable BondTable::toy() { return load(std::filesystem::path(EQUIFM_DATA_DIR) / "bond_table_toy_v1.txt"); }

void BondTable::set_cuts(const std::string& a, const std::string& b, BondCuts c) { cuts_[key(a, b)] = c; }

void BondTable::add_valency(const std::string& symbol, int charge, std::vector<int> allowed) {
  auto& v = valency_[{symbol, charge}];
  v.insert(v.end(), allowed.begin(), allowed.end());
}

const BondCuts* BondTable::cuts(const std::string& a, const std::string& b) const {
  const auto it = cuts_.find(key(a, b));
  return it == cuts_.end() ? nullptr : &it->second;
}

const std::vector<int>& BondTable::valencies(const std::string& symbol, int charge) const {
  static const std::vector<int> kNone;
  const auto it = valency_.find({symbol, charge});
  return it == valency_.end() ? kNone : it->second;
}

bool BondTable::has_element(const std::string& symbol) const { return valency_.count({symbol, 0}) > 0; }

void BondTable::validate() const {
  for (const auto& [pair, c] : cuts_) {
    const std::string name = pair.first + "-" + pair.second;
    if (c.triple && !c.double_bond) throw MetricsError(name + ": triple cut without a double cut");
    if (c.double_bond && !(*c.double_bond < c.single)) throw MetricsError(name + ": double cut must be below single");
    if (c.triple && !(*c.triple < *c.double_bond)) throw MetricsError(name + ": triple cut must be below double");
    if (!has_element(pair.first) || !has_element(pair.second))
      throw MetricsError(name + ": element without a neutral valency entry");
  }
}

std::vector<Bond> infer_bonds(const Molecule& mol, const BondTable& table, const FeatureLayout& layout) {
  const int n = mol.n_atoms();
  if (mol.coords.rows() != n) throw MetricsError("infer_bonds: coordinate and type counts differ");
  for (int ty : mol.types) {
    if (ty < 0 || ty >= layout.n_types()) throw MetricsError("infer_bonds: type index " + std::to_string(ty) + " out of range");
    if (!table.has_element(layout.symbols[static_cast<size_t>(ty)]))
      throw MetricsError("infer_bonds: element " + layout.symbols[static_cast<size_t>(ty)] + " not in the bond table");
  }
  std::vector<Bond> bonds;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const BondCuts* c = table.cuts(layout.symbols[static_cast<size_t>(mol.types[static_cast<size_t>(i)])],
                                     layout.symbols[static_cast<size_t>(mol.types[static_cast<size_t>(j)])]);
      if (c == nullptr) continue;
      const double d = (mol.coords.row(i) - mol.coords.row(j)).norm();
      int order = 0;
      if (c->triple && d < *c->triple) order = 3;
      else if (c->double_bond && d < *c->double_bond) order = 2;
      else if (d < c->single) order = 1;
      if (order > 0) bonds.push_back({i, j, order});
    }
  }
  return bonds;
}

MoleculeStability molecule_stability(const Molecule& mol, const BondTable& table, const FeatureLayout& layout) {
  const auto bonds = infer_bonds(mol, table, layout);
  std::vector<int> valence(static_cast<size_t>(mol.n_atoms()), 0);
  for (const Bond& b : bonds) {
    valence[static_cast<size_t>(b.i)] += b.order;
    valence[static_cast<size_t>(b.j)] += b.order;
  }
  MoleculeStability s;
  s.n_atoms = mol.n_atoms();
  for (int i = 0; i < s.n_atoms; ++i) {
    const int charge = mol.charges.empty() ? 0 : mol.charges[static_cast<size_t>(i)];
    const auto& allowed = table.valencies(layout.symbols[static_cast<size_t>(mol.types[static_cast<size_t>(i)])], charge);
    if (std::find(allowed.begin(), allowed.end(), valence[static_cast<size_t>(i)]) != allowed.end()) ++s.stable_atoms;
  }
  return s;
}

StabilityReport stability(const std::vector<Molecule>& mols, const BondTable& table, const FeatureLayout& layout) {
  if (mols.empty()) throw MetricsError("stability: no molecules");
  StabilityReport r;
  long atoms = 0, stable_atoms = 0, stable_mols = 0;
  for (const Molecule& m : mols) {
    const MoleculeStability s = molecule_stability(m, table, layout);
    atoms += s.n_atoms;
    stable_atoms += s.stable_atoms;
    if (s.stable()) ++stable_mols;
  }
  r.n_molecules = static_cast<int>(mols.size());
  r.atom_stable_fraction = atoms == 0 ? 0.0 : static_cast<double>(stable_atoms) / static_cast<double>(atoms);
  r.mol_stable_fraction = static_cast<double>(stable_mols) / static_cast<double>(mols.size());
  r.unique_fraction = uniqueness(mols, table, layout);
  return r;
}

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  // splitmix64 finalizer over a running combination
  std::uint64_t z = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Graph {
  std::vector<std::vector<std::pair<int, int>>> adj;  // (neighbor, order)
};

Graph build_graph(int n, const std::vector<Bond>& bonds) {
  Graph g;
  g.adj.resize(static_cast<size_t>(n));
  for (const Bond& b : bonds) {
    g.adj[static_cast<size_t>(b.i)].emplace_back(b.j, b.order);
    g.adj[static_cast<size_t>(b.j)].emplace_back(b.i, b.order);
  }
  return g;
}

std::vector<std::uint64_t> wl_colors(const Molecule& mol, const Graph& g, int rounds) {
  const int n = mol.n_atoms();
  std::vector<std::uint64_t> color(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<int> orders;
    for (const auto& [j, o] : g.adj[static_cast<size_t>(i)]) orders.push_back(o);
    std::sort(orders.begin(), orders.end());
    std::uint64_t h = mix(0x51, static_cast<std::uint64_t>(mol.types[static_cast<size_t>(i)]));
    h = mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(mol.charges.empty() ? 0 : mol.charges[static_cast<size_t>(i)])));
    for (int o : orders) h = mix(h, static_cast<std::uint64_t>(o));
    color[static_cast<size_t>(i)] = h;
  }
  for (int r = 0; r < rounds; ++r) {
    std::vector<std::uint64_t> next(color.size());
    for (int i = 0; i < n; ++i) {
      std::vector<std::uint64_t> nb;
      for (const auto& [j, o] : g.adj[static_cast<size_t>(i)]) nb.push_back(mix(color[static_cast<size_t>(j)], static_cast<std::uint64_t>(o)));
      std::sort(nb.begin(), nb.end());
      std::uint64_t h = mix(0xabc, color[static_cast<size_t>(i)]);
      for (auto v : nb) h = mix(h, v);
      next[static_cast<size_t>(i)] = h;
    }
    color.swap(next);
  }
  return color;
}

constexpr int kWlRounds = 3;

}  // namespace

std::uint64_t graph_hash(const Molecule& mol, const std::vector<Bond>& bonds) {
  const Graph g = build_graph(mol.n_atoms(), bonds);
  auto colors = wl_colors(mol, g, kWlRounds);
  std::sort(colors.begin(), colors.end());
  std::uint64_t h = mix(static_cast<std::uint64_t>(mol.n_atoms()), bonds.size());
  for (auto c : colors) h = mix(h, c);
  return h;
}

bool isomorphic(const Molecule& a, const std::vector<Bond>& bonds_a, const Molecule& b,
                const std::vector<Bond>& bonds_b) {
  const int n = a.n_atoms();
  if (n != b.n_atoms() || bonds_a.size() != bonds_b.size()) return false;
  const Graph ga = build_graph(n, bonds_a);
  const Graph gb = build_graph(n, bonds_b);
  const auto ca = wl_colors(a, ga, kWlRounds);
  const auto cb = wl_colors(b, gb, kWlRounds);
  {
    auto sa = ca, sb = cb;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) return false;
  }
  // Dense bond-order matrices for O(1) edge checks.
  std::vector<int> ma(static_cast<size_t>(n * n), 0), mb(static_cast<size_t>(n * n), 0);
  for (const Bond& e : bonds_a) ma[static_cast<size_t>(e.i * n + e.j)] = ma[static_cast<size_t>(e.j * n + e.i)] = e.order;
  for (const Bond& e : bonds_b) mb[static_cast<size_t>(e.i * n + e.j)] = mb[static_cast<size_t>(e.j * n + e.i)] = e.order;

  std::vector<int> map(static_cast<size_t>(n), -1);
  std::vector<bool> used(static_cast<size_t>(n), false);
  std::function<bool(int)> extend = [&](int i) -> bool {
    if (i == n) return true;
    for (int j = 0; j < n; ++j) {
      if (used[static_cast<size_t>(j)] || cb[static_cast<size_t>(j)] != ca[static_cast<size_t>(i)]) continue;
      bool ok = true;
      for (int k = 0; k < i && ok; ++k)
        ok = ma[static_cast<size_t>(i * n + k)] == mb[static_cast<size_t>(j * n + map[static_cast<size_t>(k)])];
      if (!ok) continue;
      map[static_cast<size_t>(i)] = j;
      used[static_cast<size_t>(j)] = true;
      if (extend(i + 1)) return true;
      used[static_cast<size_t>(j)] = false;
    }
    map[static_cast<size_t>(i)] = -1;
    return false;
  };
  return extend(0);
}

double uniqueness(const std::vector<Molecule>& mols, const BondTable& table, const FeatureLayout& layout) {
  if (mols.empty()) return 0.0;
  std::vector<std::vector<Bond>> bonds;
  bonds.reserve(mols.size());
  for (const Molecule& m : mols) bonds.push_back(infer_bonds(m, table, layout));
  // hash -> representatives (index of first member of each isomorphism class)
  std::map<std::uint64_t, std::vector<std::size_t>> classes;
  std::size_t distinct = 0;
  for (std::size_t k = 0; k < mols.size(); ++k) {
    auto& reps = classes[graph_hash(mols[k], bonds[k])];
    bool seen = false;
    for (std::size_t r : reps) {
      if (mols[k].n_atoms() > kExactIsoMaxAtoms || isomorphic(mols[r], bonds[r], mols[k], bonds[k])) {
        seen = true;
        break;
      }
    }
    if (!seen) {
      reps.push_back(k);
      ++distinct;
    }
  }
  return static_cast<double>(distinct) / static_cast<double>(mols.size());
}

std::string stability_csv(const StabilityReport& r) {
  std::ostringstream out;
  out.precision(10);
  out << "n_molecules,atom_stable_fraction,mol_stable_fraction,unique_fraction\n"
      << r.n_molecules << ',' << r.atom_stable_fraction << ',' << r.mol_stable_fraction << ',' << r.unique_fraction
      << '\n';
  return out.str();
}

}  // namespace equifm
