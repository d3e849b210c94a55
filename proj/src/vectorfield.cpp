#include "equifm/vectorfield.hpp"

#include <cmath>
#include <random>
#include <string>

namespace equifm {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMatrix>;
using Weights = Eigen::Map<RowMatrix>;

ConstWeights weights(const Eigen::VectorXd& p, const LinearBlock& b) {
  return ConstWeights(p.data() + b.offset, b.out, b.in);
}
Eigen::Map<const Eigen::RowVectorXd> bias(const Eigen::VectorXd& p, const LinearBlock& b) {
  return Eigen::Map<const Eigen::RowVectorXd>(p.data() + b.bias_offset(), b.out);
}

Eigen::MatrixXd linear(const Eigen::VectorXd& p, const LinearBlock& b, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = x * weights(p, b).transpose();
  y.rowwise() += bias(p, b);
  return y;
}

// Accumulates weight/bias gradients for y = x W^T + b and returns dL/dx.
Eigen::MatrixXd linear_backward(const Eigen::VectorXd& p, const LinearBlock& b, const Eigen::MatrixXd& x,
                                const Eigen::MatrixXd& gy, Eigen::Ref<Eigen::VectorXd> grad) {
  Weights gw(grad.data() + b.offset, b.out, b.in);
  gw.noalias() += gy.transpose() * x;
  Eigen::Map<Eigen::RowVectorXd>(grad.data() + b.bias_offset(), b.out) += gy.colwise().sum();
  return gy * weights(p, b);
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Eigen::MatrixXd silu(const Eigen::MatrixXd& a) {
  return a.unaryExpr([](double v) { return v * sigmoid(v); });
}

Eigen::MatrixXd silu_backward(const Eigen::MatrixXd& a, const Eigen::MatrixXd& g) {
  return g.cwiseProduct(a.unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  }));
}

LinearBlock next_block(std::size_t& offset, int in, int out) {
  LinearBlock b{in, out, offset};
  offset += b.size();
  return b;
}

// Edge e = (i, j) with j != i, enumerated row-major: e = i (N-1) + (j < i ? j : j - 1).
int edge_target(int i, int k) { return k < i ? k : k + 1; }

}  // namespace

std::vector<double> time_embedding_frequencies() {
  std::vector<double> f;
  for (int k = 0; k < kTimeEmbeddingWidth / 2; ++k) f.push_back(std::pow(100.0, k / 7.0));
  return f;
}

Eigen::VectorXd time_embedding(double t) {
  const std::vector<double> f = time_embedding_frequencies();
  const int half = kTimeEmbeddingWidth / 2;
  Eigen::VectorXd e(kTimeEmbeddingWidth);
  for (int k = 0; k < half; ++k) {
    e[k] = std::sin(f[static_cast<size_t>(k)] * t);
    e[k + half] = std::cos(f[static_cast<size_t>(k)] * t);
  }
  return e;
}

ParameterLayout ParameterLayout::of(const ModelDims& dims) {
  if (dims.n_layers < 1 || dims.hidden < 1 || dims.feature_dim < 1)
    throw ModelError("model dimensions must be positive");
  const int h = dims.hidden;
  ParameterLayout out;
  std::size_t offset = 0;
  out.embed = next_block(offset, dims.feature_dim + kTimeEmbeddingWidth, h);
  for (int l = 0; l < dims.n_layers; ++l) {
    LayerBlocks lb;
    lb.edge1 = next_block(offset, 2 * h + 1 + kTimeEmbeddingWidth, h);
    lb.edge2 = next_block(offset, h, h);
    lb.coord1 = next_block(offset, h, h);
    lb.coord2 = next_block(offset, h, 1);
    lb.node1 = next_block(offset, 2 * h, h);
    lb.node2 = next_block(offset, h, h);
    out.layers.push_back(lb);
  }
  out.head = next_block(offset, h, dims.feature_dim);
  out.total = offset;
  return out;
}

std::size_t parameter_count(const ModelDims& dims) { return ParameterLayout::of(dims).total; }

VectorFieldModel::VectorFieldModel(const ModelDims& dims, std::uint64_t seed, Eigen::VectorXd params)
    : dims_(dims), layout_(ParameterLayout::of(dims)), seed_(seed), params_(std::move(params)) {
  if (static_cast<std::size_t>(params_.size()) != layout_.total)
    throw ModelError("parameter array has " + std::to_string(params_.size()) + " entries, dimensions need " +
                     std::to_string(layout_.total));
}

VectorFieldModel::VectorFieldModel(const ModelDims& dims, std::uint64_t seed)
    : VectorFieldModel(dims, seed, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count(dims)))) {
  Rng rng(seed);
  const auto init = [&](const LinearBlock& b) {
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(b.in), 1.0 / std::sqrt(b.in));
    for (std::size_t k = 0; k < b.size(); ++k) params_[static_cast<Eigen::Index>(b.offset + k)] = u(rng);
  };
  init(layout_.embed);
  for (const LayerBlocks& lb : layout_.layers) {
    init(lb.edge1);
    init(lb.edge2);
    init(lb.coord1);
    init(lb.node1);
    init(lb.node2);
  }
}

VectorFieldModel VectorFieldModel::from_parameters(const ModelDims& dims, std::uint64_t seed, Eigen::VectorXd params) {
  return VectorFieldModel(dims, seed, std::move(params));
}

FieldOutput forward(const VectorFieldModel& m, const MoleculeGeometry& g, double t, ForwardCache* cache) {
  const ModelDims& dims = m.dims();
  const ParameterLayout& lay = m.layout();
  const Eigen::VectorXd& p = m.parameters();
  const int n = g.n_nodes();
  const int h = dims.hidden;
  if (n < 1) throw ModelError("forward: empty geometry");
  if (g.feature_dim() != dims.feature_dim || g.features.rows() != n)
    throw ModelError("forward: features are " + std::to_string(g.features.rows()) + "x" +
                     std::to_string(g.feature_dim()) + ", model expects width " + std::to_string(dims.feature_dim));
  if (!g.coords.allFinite() || !g.features.allFinite()) throw ModelError("forward: non-finite input");

  const int n_edges = n * (n - 1);
  const Eigen::VectorXd temb = time_embedding(t);

  Eigen::MatrixXd embed_in(n, dims.feature_dim + kTimeEmbeddingWidth);
  embed_in.leftCols(dims.feature_dim) = g.features;
  embed_in.rightCols(kTimeEmbeddingWidth).rowwise() = temb.transpose();
  Eigen::MatrixXd hcur = linear(p, lay.embed, embed_in);
  Eigen::MatrixXd xcur = g.coords;

  if (cache) {
    cache->model = &m;
    cache->version = m.version();
    cache->n_nodes = n;
    cache->t = t;
    cache->embed_in = embed_in;
    cache->layers.assign(lay.layers.size(), LayerCache{});
  }

  for (std::size_t l = 0; l < lay.layers.size(); ++l) {
    const LayerBlocks& lb = lay.layers[l];
    Eigen::MatrixXd diff(n_edges, 3);
    Eigen::VectorXd dist2(n_edges);
    // The first edge layer is split by input segment so the h_i and h_j
    // products are formed once per node rather than once per edge.
    const ConstWeights w1 = weights(p, lb.edge1);
    const Eigen::MatrixXd from_i = hcur * w1.leftCols(h).transpose();
    const Eigen::MatrixXd from_j = hcur * w1.middleCols(h, h).transpose();
    const Eigen::RowVectorXd w_dist = w1.col(2 * h).transpose();
    const Eigen::RowVectorXd shared = (w1.rightCols(kTimeEmbeddingWidth) * temb).transpose() + bias(p, lb.edge1);
    Eigen::MatrixXd a1(n_edges, lb.edge1.out);
    for (int i = 0, e = 0; i < n; ++i) {
      for (int k = 0; k < n - 1; ++k, ++e) {
        const int j = edge_target(i, k);
        diff.row(e) = xcur.row(i) - xcur.row(j);
        dist2[e] = diff.row(e).squaredNorm();
        a1.row(e) = from_i.row(i) + from_j.row(j) + (dist2[e] / (1.0 + dist2[e])) * w_dist + shared;
      }
    }
    Eigen::MatrixXd edge_in;
    if (cache) {
      edge_in.resize(n_edges, lb.edge1.in);
      for (int i = 0, e = 0; i < n; ++i) {
        for (int k = 0; k < n - 1; ++k, ++e) {
          edge_in.row(e).segment(0, h) = hcur.row(i);
          edge_in.row(e).segment(h, h) = hcur.row(edge_target(i, k));
          edge_in(e, 2 * h) = dist2[e] / (1.0 + dist2[e]);
          edge_in.row(e).tail(kTimeEmbeddingWidth) = temb.transpose();
        }
      }
    }
    Eigen::MatrixXd m1 = silu(a1);
    Eigen::MatrixXd a2 = linear(p, lb.edge2, m1);
    Eigen::MatrixXd msg = silu(a2);
    Eigen::MatrixXd b1 = linear(p, lb.coord1, msg);
    Eigen::MatrixXd p1 = silu(b1);
    Eigen::VectorXd phi = linear(p, lb.coord2, p1).col(0);

    Eigen::MatrixXd disp = Eigen::MatrixXd::Zero(n, 3);
    Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(n, h);
    for (int i = 0, e = 0; i < n; ++i) {
      for (int k = 0; k < n - 1; ++k, ++e) {
        disp.row(i) += phi[e] * diff.row(e);
        agg.row(i) += msg.row(e);
      }
    }
    Eigen::MatrixXd clipped = disp;
    for (int i = 0; i < n; ++i) {
      const double norm = disp.row(i).norm();
      if (norm > kMaxDisplacement) clipped.row(i) *= kMaxDisplacement / norm;
    }

    Eigen::MatrixXd node_in(n, 2 * h);
    node_in.leftCols(h) = hcur;
    node_in.rightCols(h) = agg;
    Eigen::MatrixXd c1 = linear(p, lb.node1, node_in);
    Eigen::MatrixXd q1 = silu(c1);
    Eigen::MatrixXd hnext = hcur + linear(p, lb.node2, q1);
    Eigen::MatrixXd xnext = xcur + clipped;

    if (cache) {
      LayerCache& lc = cache->layers[l];
      lc.h_in = std::move(hcur);
      lc.x_in = std::move(xcur);
      lc.diff = std::move(diff);
      lc.dist2 = std::move(dist2);
      lc.edge_in = std::move(edge_in);
      lc.a1 = std::move(a1);
      lc.m1 = std::move(m1);
      lc.a2 = std::move(a2);
      lc.msg = std::move(msg);
      lc.b1 = std::move(b1);
      lc.p1 = std::move(p1);
      lc.phi = std::move(phi);
      lc.disp = std::move(disp);
      lc.agg = std::move(agg);
      lc.node_in = std::move(node_in);
      lc.c1 = std::move(c1);
      lc.q1 = std::move(q1);
    }
    hcur = std::move(hnext);
    xcur = std::move(xnext);
  }

  FieldOutput out;
  out.no_edges = n == 1;
  out.vx = xcur - g.coords;
  project_zero_com_inplace(out.vx);
  out.vh = linear(p, lay.head, hcur);
  if (cache) cache->h_final = std::move(hcur);
  return out;
}

void backward(const VectorFieldModel& m, const ForwardCache& cache, const FieldOutput& upstream,
              Eigen::Ref<Eigen::VectorXd> grad) {
  if (cache.model != &m || cache.version != m.version())
    throw ModelError("backward: forward cache is stale (recorded for a different parameter state)");
  const ParameterLayout& lay = m.layout();
  const Eigen::VectorXd& p = m.parameters();
  const int n = cache.n_nodes;
  const int h = m.dims().hidden;
  if (static_cast<std::size_t>(grad.size()) != lay.total) throw ModelError("backward: gradient array has the wrong size");
  if (upstream.vx.rows() != n || upstream.vx.cols() != 3 || upstream.vh.rows() != n ||
      upstream.vh.cols() != m.dims().feature_dim)
    throw ModelError("backward: upstream gradient shape does not match the cached forward pass");

  Eigen::MatrixXd gh = linear_backward(p, lay.head, cache.h_final, upstream.vh, grad);
  // vx = P (x_L - x_0) with P the symmetric Zero-CoM projector.
  Eigen::MatrixXd gx = upstream.vx;
  project_zero_com_inplace(gx);

  for (std::size_t li = lay.layers.size(); li-- > 0;) {
    const LayerBlocks& lb = lay.layers[li];
    const LayerCache& lc = cache.layers[li];

    // h_{l+1} = h_l + node2(silu(node1([h_l, agg])))
    const Eigen::MatrixXd gq1 = linear_backward(p, lb.node2, lc.q1, gh, grad);
    const Eigen::MatrixXd gnode_in = linear_backward(p, lb.node1, lc.node_in, silu_backward(lc.c1, gq1), grad);
    Eigen::MatrixXd gh_in = gh + gnode_in.leftCols(h);
    const Eigen::MatrixXd gagg = gnode_in.rightCols(h);

    // x_{l+1} = x_l + clip(disp)
    Eigen::MatrixXd gdisp = gx;
    for (int i = 0; i < n; ++i) {
      const double norm = lc.disp.row(i).norm();
      if (norm > kMaxDisplacement) {
        const Eigen::RowVector3d unit = lc.disp.row(i) / norm;
        const Eigen::RowVector3d g = gx.row(i);
        gdisp.row(i) = (kMaxDisplacement / norm) * (g - g.dot(unit) * unit);
      }
    }
    Eigen::MatrixXd gx_in = gx;
    const Eigen::Index n_edges = lc.diff.rows();
    Eigen::VectorXd gphi(n_edges);
    Eigen::MatrixXd gmsg(n_edges, h);
    for (int i = 0, e = 0; i < n; ++i) {
      for (int k = 0; k < n - 1; ++k, ++e) {
        const int j = edge_target(i, k);
        gphi[e] = gdisp.row(i).dot(lc.diff.row(e));
        gx_in.row(i) += lc.phi[e] * gdisp.row(i);
        gx_in.row(j) -= lc.phi[e] * gdisp.row(i);
        gmsg.row(e) = gagg.row(i);
      }
    }

    const Eigen::MatrixXd gp1 = linear_backward(p, lb.coord2, lc.p1, gphi, grad);
    gmsg += linear_backward(p, lb.coord1, lc.msg, silu_backward(lc.b1, gp1), grad);
    const Eigen::MatrixXd gm1 = linear_backward(p, lb.edge2, lc.m1, silu_backward(lc.a2, gmsg), grad);
    const Eigen::MatrixXd gedge = linear_backward(p, lb.edge1, lc.edge_in, silu_backward(lc.a1, gm1), grad);

    for (int i = 0, e = 0; i < n; ++i) {
      for (int k = 0; k < n - 1; ++k, ++e) {
        const int j = edge_target(i, k);
        gh_in.row(i) += gedge.row(e).segment(0, h);
        gh_in.row(j) += gedge.row(e).segment(h, h);
        const double d = lc.dist2[e];
        const double gd = gedge(e, 2 * h) / ((1.0 + d) * (1.0 + d));
        gx_in.row(i) += 2.0 * gd * lc.diff.row(e);
        gx_in.row(j) -= 2.0 * gd * lc.diff.row(e);
      }
    }
    gh = std::move(gh_in);
    gx = std::move(gx_in);
  }
  linear_backward(p, lay.embed, cache.embed_in, gh, grad);
}

Eigen::VectorXd backward(const VectorFieldModel& m, const ForwardCache& cache, const FieldOutput& upstream) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.layout().total));
  backward(m, cache, upstream, grad);
  return grad;
}

}  // namespace equifm
