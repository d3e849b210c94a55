#pragma once

// Bond-graph quality metrics for discretized molecules.
//
// Bonds come from a distance lookup: for an element pair with cuts
// single > double > triple, a pair at distance d gets the highest order whose
// cut exceeds d. An atom is stable when its summed bond order equals an
// allowed valency for its (element, charge).

#include "equifm/molecule.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace equifm {

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BondCuts {
  double single = 0.0;
  std::optional<double> double_bond;
  std::optional<double> triple;
};

class BondTable {
 public:
  /// Text format, one directive per line ('#' starts a comment):
  ///   version 1
  ///   rule midpoint              later `lengths` lines use cuts 1.1*L1,
  ///                              (L1+L2)/2 and (L2+L3)/2 (the default)
  ///   rule margins m1 m2 m3      later `lengths` lines use cuts L1+m1,
  ///                              L2+m2 and L3+m3
  ///   lengths A B L1 [L2 [L3]]   reference single/double/triple lengths
  ///   cuts A B c1 [c2 [c3]]      explicit single/double/triple cuts
  ///   valency SYM CHARGE V...    allowed summed bond orders
  static BondTable parse(const std::string& text, const std::string& source = "<string>");
  static BondTable load(const std::filesystem::path& path);
  /// The QM9 table shipped in data/ (H, C, N, O, F).
  static BondTable shipped();
  /// Single-bond table matched to the synthetic toy molecules.
  static BondTable toy();

  void set_cuts(const std::string& a, const std::string& b, BondCuts cuts);
  void add_valency(const std::string& symbol, int charge, std::vector<int> allowed);

  /// Cuts for an unordered element pair; nullptr if the pair never bonds.
  const BondCuts* cuts(const std::string& a, const std::string& b) const;
  /// Allowed valencies; empty if (symbol, charge) is not listed.
  const std::vector<int>& valencies(const std::string& symbol, int charge) const;
  bool has_element(const std::string& symbol) const;
  /// Throws MetricsError if some cuts are out of order or an element lacks a neutral valency.
  void validate() const;

 private:
  std::map<std::pair<std::string, std::string>, BondCuts> cuts_;
  std::map<std::pair<std::string, int>, std::vector<int>> valency_;
};

struct Bond {
  int i = 0;
  int j = 0;
  int order = 0;
  bool operator==(const Bond&) const = default;
};

std::vector<Bond> infer_bonds(const Molecule& mol, const BondTable& table, const FeatureLayout& layout = {});

struct MoleculeStability {
  int stable_atoms = 0;
  int n_atoms = 0;
  bool stable() const { return n_atoms > 0 && stable_atoms == n_atoms; }
};

MoleculeStability molecule_stability(const Molecule& mol, const BondTable& table, const FeatureLayout& layout = {});

struct StabilityReport {
  double atom_stable_fraction = 0.0;
  double mol_stable_fraction = 0.0;
  double unique_fraction = 0.0;
  int n_molecules = 0;
};

StabilityReport stability(const std::vector<Molecule>& mols, const BondTable& table, const FeatureLayout& layout = {});

/// Weisfeiler-Lehman hash (3 rounds) of the typed bond multigraph.
std::uint64_t graph_hash(const Molecule& mol, const std::vector<Bond>& bonds);
/// Exact typed-graph isomorphism by backtracking.
bool isomorphic(const Molecule& a, const std::vector<Bond>& bonds_a, const Molecule& b,
                const std::vector<Bond>& bonds_b);

/// Fraction of distinct bond graphs. Hash collisions are split by an exact
/// isomorphism check for molecules of up to kExactIsoMaxAtoms atoms.
inline constexpr int kExactIsoMaxAtoms = 12;
double uniqueness(const std::vector<Molecule>& mols, const BondTable& table, const FeatureLayout& layout = {});

std::string stability_csv(const StabilityReport& r);

}  // namespace equifm
