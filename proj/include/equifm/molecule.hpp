#pragma once

#include "equifm/geometry.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace equifm {

/// Column layout of the continuous node features h: a one-hot block over the
/// atom alphabet followed by an optional real-valued charge channel.
struct FeatureLayout {
  std::vector<std::string> symbols{"H", "C", "N", "O", "F"};
  bool charge_channel = true;

  int n_types() const { return static_cast<int>(symbols.size()); }
  int dim() const { return n_types() + (charge_channel ? 1 : 0); }
  int charge_column() const { return n_types(); }
  /// Index of `symbol` in the one-hot block, or -1.
  int type_index(const std::string& symbol) const;
  bool operator==(const FeatureLayout&) const = default;
};

/// g = <x, h>: Zero-CoM coordinates plus per-node continuous features.
struct MoleculeGeometry {
  PointCloud coords;
  Eigen::MatrixXd features;

  int n_nodes() const { return static_cast<int>(coords.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
};

/// A molecule with discrete atom types (indices into a FeatureLayout) and
/// integer charges.
struct Molecule {
  PointCloud coords;
  std::vector<int> types;
  std::vector<int> charges;

  int n_atoms() const { return static_cast<int>(types.size()); }
};

}  // namespace equifm
