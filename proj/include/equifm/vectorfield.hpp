#pragma once

// A fully connected E(n)-equivariant graph network realizing the learned
// vector field v(g, t) = (vx, vh).
//
// Per layer l, for every ordered pair i != j:
//   s_ij = d_ij / (1 + d_ij),  d_ij = |x_i - x_j|^2
//   m_ij = silu(W2 silu(W1 [h_i, h_j, s_ij, e(t)] + b1) + b2)
//   x_i <- x_i + clip_100( sum_j (x_i - x_j) * phi_x(m_ij) )
//   h_i <- h_i + phi_h([h_i, sum_j m_ij])
// with phi_x = Linear(H,1) . silu . Linear(H,H) and phi_h = Linear(H,H) . silu
// . Linear(2H,H). The input embedding is Linear(d + 16, H) on [h, e(t)], vx is
// the Zero-CoM projection of the total coordinate displacement and vh a linear
// head on the final node features.
//
// Parameters live in one flat array; every Linear(in, out) block stores a
// row-major out x in weight followed by its out biases. Block order:
//   embed | layer 0: edge1 edge2 coord1 coord2 node1 node2 | layer 1 ... | head
// so the count is
//   (d+17)H + L[(2H+18)H + 2(H+1)H + (H+1) + (2H+1)H + (H+1)H] + (H+1)d.

#include "equifm/molecule.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace equifm {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kTimeEmbeddingWidth = 16;
/// Per-node, per-layer cap on the coordinate displacement norm.
inline constexpr double kMaxDisplacement = 100.0;

/// [sin(f_k t), cos(f_k t)] for 8 frequencies log-spaced over [1, 100].
/// e(0) is eight zeros followed by eight ones.
Eigen::VectorXd time_embedding(double t);
/// Frequencies used by time_embedding (Lipschitz constant is their 2-norm).
std::vector<double> time_embedding_frequencies();

struct ModelDims {
  int n_layers = 3;
  int hidden = 64;
  int feature_dim = 6;

  bool operator==(const ModelDims&) const = default;
};

struct LinearBlock {
  int in = 0;
  int out = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(in + 1) * static_cast<std::size_t>(out); }
  std::size_t bias_offset() const { return offset + static_cast<std::size_t>(in) * static_cast<std::size_t>(out); }
};

struct LayerBlocks {
  LinearBlock edge1, edge2, coord1, coord2, node1, node2;
};

struct ParameterLayout {
  LinearBlock embed;
  std::vector<LayerBlocks> layers;
  LinearBlock head;
  std::size_t total = 0;

  static ParameterLayout of(const ModelDims& dims);
};

std::size_t parameter_count(const ModelDims& dims);

class VectorFieldModel {
 public:
  /// Linear maps uniform in +-1/sqrt(fan_in); coord2 blocks and the head are zero.
  VectorFieldModel(const ModelDims& dims, std::uint64_t seed);
  static VectorFieldModel from_parameters(const ModelDims& dims, std::uint64_t seed, Eigen::VectorXd params);

  const ModelDims& dims() const { return dims_; }
  const ParameterLayout& layout() const { return layout_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t version() const { return version_; }

  const Eigen::VectorXd& parameters() const { return params_; }
  /// Every call invalidates outstanding forward caches.
  Eigen::VectorXd& mutable_parameters() {
    ++version_;
    return params_;
  }
  bool all_finite() const { return params_.allFinite(); }

 private:
  VectorFieldModel(const ModelDims& dims, std::uint64_t seed, Eigen::VectorXd params);
  ModelDims dims_;
  ParameterLayout layout_;
  std::uint64_t seed_ = 0;
  std::uint64_t version_ = 0;
  Eigen::VectorXd params_;
};

struct FieldOutput {
  Eigen::MatrixXd vx;  // N x 3, Zero-CoM
  Eigen::MatrixXd vh;  // N x d
  /// Set for single-node inputs: there are no edges, so vx is zero.
  bool no_edges = false;
};

struct LayerCache {
  Eigen::MatrixXd h_in, x_in;
  Eigen::MatrixXd diff;  // E x 3, x_i - x_j
  Eigen::VectorXd dist2;
  Eigen::MatrixXd edge_in, a1, m1, a2, msg, b1, p1;
  Eigen::VectorXd phi;
  Eigen::MatrixXd disp;  // before clipping
  Eigen::MatrixXd agg, node_in, c1, q1;
};

/// Intermediates recorded by forward() for backward().
struct ForwardCache {
  const VectorFieldModel* model = nullptr;
  std::uint64_t version = 0;
  int n_nodes = 0;
  double t = 0.0;
  Eigen::MatrixXd embed_in;
  std::vector<LayerCache> layers;
  Eigen::MatrixXd h_final;
};

FieldOutput forward(const VectorFieldModel& m, const MoleculeGeometry& g, double t, ForwardCache* cache = nullptr);

/// Adds d<upstream, forward(g, t)>/d(params) into `grad`. Throws ModelError if
/// the cache was recorded for another model or before a parameter change.
void backward(const VectorFieldModel& m, const ForwardCache& cache, const FieldOutput& upstream,
              Eigen::Ref<Eigen::VectorXd> grad);
Eigen::VectorXd backward(const VectorFieldModel& m, const ForwardCache& cache, const FieldOutput& upstream);

}  // namespace equifm
