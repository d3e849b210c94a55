#pragma once

// Dataset ingestion and encoding.
//
// XYZ frames: a count line, a comment line, then `Symbol x y z [charge]` rows.
// A file may hold several frames back to back. Every geometry is projected to
// Zero-CoM on the way in.

#include "equifm/molecule.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace equifm {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::vector<MoleculeGeometry> molecules;
  /// Node count -> number of molecules with that many nodes.
  std::map<int, int> size_histogram;
  FeatureLayout layout;

  static Dataset from_molecules(const std::vector<Molecule>& mols, const FeatureLayout& layout = {});
  int size() const { return static_cast<int>(molecules.size()); }
  /// Discrete view of molecule i (exact inverse of the encoding).
  Molecule molecule(int i) const;
};

/// One-hot type block plus the charge channel; coordinates are centered.
MoleculeGeometry encode(const std::vector<int>& types, const std::vector<int>& charges, const PointCloud& coords,
                        const FeatureLayout& layout = {});
MoleculeGeometry encode(const Molecule& mol, const FeatureLayout& layout = {});

std::vector<Molecule> read_xyz_molecules(const std::filesystem::path& path, const FeatureLayout& layout = {});
std::vector<Molecule> parse_xyz(const std::string& text, const FeatureLayout& layout = {},
                                const std::string& source = "<string>");
Dataset read_xyz(const std::filesystem::path& path, const FeatureLayout& layout = {});

/// Coordinates printed with 6 decimals; the charge column appears only when a
/// frame has a non-zero charge.
std::string format_xyz(const std::vector<Molecule>& mols, const FeatureLayout& layout = {});
void write_xyz(const std::vector<Molecule>& mols, const std::filesystem::path& path,
               const FeatureLayout& layout = {});

/// Reference geometry of the toy molecule with `n_atoms` nodes (3..6):
/// H2O, NH3, CH3F, CH3OH. Centered, in Angstrom.
Molecule toy_template(int n_atoms, const FeatureLayout& layout = {});

/// Largest per-atom jitter displacement in the toy dataset (Angstrom).
inline constexpr double kToyJitterSigma = 0.05;
inline constexpr double kToyJitterMaxNorm = 0.2;

/// Molecules of 3-6 atoms drawn uniformly over sizes. Each is its size's
/// template with per-atom Gaussian jitter (sigma 0.05, displacement norm
/// truncated at 0.2), then a uniform random rotation and a random node order.
Dataset synthetic_toy_dataset(int n_molecules, std::uint64_t seed, const FeatureLayout& layout = {});

/// Per-dataset statistics rows: n_nodes, count.
std::string size_histogram_csv(const Dataset& ds);

}  // namespace equifm
