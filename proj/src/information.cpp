#include "equifm/information.hpp"

#include "equifm/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace equifm {

double FeatureAlphabet::entropy() const {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

FeatureAlphabet feature_alphabet(const Dataset& ds) {
  std::map<std::vector<double>, long> counts;
  long total = 0;
  for (const MoleculeGeometry& g : ds.molecules) {
    for (Eigen::Index i = 0; i < g.features.rows(); ++i) {
      const Eigen::RowVectorXd row = g.features.row(i);
      ++counts[std::vector<double>(row.data(), row.data() + row.size())];
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("feature_alphabet: dataset has no nodes");
  FeatureAlphabet a;
  for (const auto& [row, c] : counts) {
    a.symbols.push_back(Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(row.size())));
    a.probs.push_back(static_cast<double>(c) / static_cast<double>(total));
  }
  return a;
}

namespace {

double logsumexp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

void mean_and_error(const std::vector<double>& v, double& mean, double& err) {
  const double n = static_cast<double>(v.size());
  mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  err = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
}

}  // namespace

MiEstimate mi_hh(const FeatureAlphabet& alphabet, double alpha, double sigma, int n_mc, Rng& rng) {
  if (n_mc < 2) throw std::invalid_argument("mi_hh: n_mc must be at least 2");
  if (alphabet.symbols.empty()) throw std::invalid_argument("mi_hh: empty alphabet");
  if (!(sigma >= 0.0)) throw std::invalid_argument("mi_hh: sigma must be non-negative");
  const auto K = static_cast<Eigen::Index>(alphabet.symbols.size());
  const Eigen::Index d = alphabet.symbols.front().size();
  Eigen::VectorXd log_p(K);
  for (Eigen::Index k = 0; k < K; ++k) log_p[k] = std::log(alphabet.probs[static_cast<size_t>(k)]);

  std::discrete_distribution<int> pick(alphabet.probs.begin(), alphabet.probs.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> values(static_cast<size_t>(n_mc));
  Eigen::VectorXd h(d), logits(K);
  for (int s = 0; s < n_mc; ++s) {
    const int k = pick(rng);
    for (Eigen::Index c = 0; c < d; ++c) h[c] = normal(rng);
    if (sigma == 0.0) {
      // Noise-free endpoint: the posterior is a point mass on k.
      values[static_cast<size_t>(s)] = alpha != 0.0 ? -log_p[k] : 0.0;
      continue;
    }
    h = alpha * alphabet.symbols[static_cast<size_t>(k)] + sigma * h;
    for (Eigen::Index j = 0; j < K; ++j)
      logits[j] = log_p[j] - (h - alpha * alphabet.symbols[static_cast<size_t>(j)]).squaredNorm() / (2.0 * sigma * sigma);
    values[static_cast<size_t>(s)] = logits[k] - logsumexp(logits) - log_p[k];
  }
  MiEstimate est;
  est.estimator = "exact-discrete";
  est.entropy = alphabet.entropy();
  mean_and_error(values, est.value, est.std_error);
  return est;
}

MiEstimate mi_hh(const Dataset& ds, const ConditionalPath& path_h, double t, int n_mc, Rng& rng) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("mi_hh: t must lie in [0, 1]");
  path_h.validate();
  MiEstimate est = mi_hh(feature_alphabet(ds), path_h.signal_scale(t), path_h.noise_scale(t), n_mc, rng);
  est.t = t;
  return est;
}

std::vector<double> unit_grid(int n) {
  if (n < 2) throw std::invalid_argument("unit_grid needs at least two points");
  std::vector<double> g(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<size_t>(i)] = static_cast<double>(i) / (n - 1);
  g.back() = 1.0;
  return g;
}

Eigen::MatrixXd distance_features(const PointCloud& x, const ClassifierConfig& cfg) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd f(n, kDistanceFeatures);
  const Eigen::RowVector3d centroid = x.colwise().mean();
  std::vector<double> d;
  for (Eigen::Index i = 0; i < n; ++i) {
    d.clear();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) d.push_back((x.row(i) - x.row(j)).norm());
    std::sort(d.begin(), d.end());
    const double dmax = d.empty() ? 0.0 : d.back();
    for (int k = 0; k < 4; ++k) f(i, k) = k < static_cast<int>(d.size()) ? d[static_cast<size_t>(k)] : dmax;
    f(i, 4) = (x.row(i) - centroid).norm();
    f(i, 5) = d.empty() ? 0.0 : std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    f(i, 6) = dmax;
    double soft = 0.0;
    for (double v : d) soft += 1.0 / (1.0 + std::exp(-(cfg.neighbor_cutoff - v) / cfg.neighbor_width));
    f(i, 7) = soft;
  }
  return f;
}

namespace {

struct NodeSet {
  Eigen::MatrixXd features;  // rows: nodes
  std::vector<int> labels;
  std::vector<int> sizes;
};

// Multinomial logistic regression with a fixed per-row logit offset.
class OffsetLogistic {
 public:
  OffsetLogistic(int n_features, int n_classes) : w_(Eigen::MatrixXd::Zero(n_features + 1, n_classes)) {}

  Eigen::MatrixXd log_probs(const Eigen::MatrixXd& x, const Eigen::MatrixXd& offset) const {
    Eigen::MatrixXd logits = with_bias(x) * w_ + offset;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) logits.row(r).array() -= logsumexp(logits.row(r).transpose());
    return logits;
  }

  void fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& offset, const std::vector<int>& y, const ClassifierConfig& cfg) {
    const Eigen::MatrixXd xb = with_bias(x);
    const double n = static_cast<double>(x.rows());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(w_.rows(), w_.cols()), v = m;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int step = 1; step <= cfg.steps; ++step) {
      Eigen::MatrixXd p = log_probs(x, offset).array().exp();
      for (Eigen::Index r = 0; r < p.rows(); ++r) p(r, y[static_cast<size_t>(r)]) -= 1.0;
      Eigen::MatrixXd grad = xb.transpose() * p / n;
      grad.topRows(w_.rows() - 1) += 2.0 * cfg.l2 * w_.topRows(w_.rows() - 1);
      m = b1 * m + (1 - b1) * grad;
      v = b2 * v + (1 - b2) * grad.cwiseProduct(grad);
      const double c1 = 1 - std::pow(b1, step), c2 = 1 - std::pow(b2, step);
      w_.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
  }

 private:
  static Eigen::MatrixXd with_bias(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd xb(x.rows(), x.cols() + 1);
    xb << x, Eigen::VectorXd::Ones(x.rows());
    return xb;
  }
  Eigen::MatrixXd w_;
};

}  // namespace

MiEstimate mi_xh(const Dataset& ds, const ConditionalPath& path_x, double t, const ClassifierConfig& cfg) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("mi_xh: t must lie in [0, 1]");
  path_x.validate();
  if (cfg.steps < 1 || !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw std::invalid_argument("mi_xh: invalid classifier configuration");
  const int n_mol = ds.size();
  const int n_test = static_cast<int>(std::round(cfg.test_fraction * n_mol));
  if (n_test < 2 || n_mol - n_test < 2) throw std::invalid_argument("mi_xh: dataset too small to split");

  Rng rng(cfg.seed);
  Rng eot_rng(cfg.seed + 1);  // kept apart so restarts do not shift the noise stream
  std::vector<int> order(static_cast<size_t>(n_mol));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const double a = path_x.signal_scale(t);
  const double s = path_x.noise_scale(t);
  EotOptions eot;
  eot.restarts = cfg.eot_restarts;
  NodeSet train, test;
  std::vector<Eigen::MatrixXd> train_f, test_f;
  for (int k = 0; k < n_mol; ++k) {
    const int idx = order[static_cast<size_t>(k)];
    const Molecule mol = ds.molecule(idx);
    const PointCloud& x0 = ds.molecules[static_cast<size_t>(idx)].coords;
    PointCloud eps = project_zero_com(gaussian_cloud(mol.n_atoms(), rng));
    if (path_x.kind == PathKind::EOT && mol.n_atoms() > 1) {
      const EotPlan plan = solve_eot(eps, x0, eot, eot_rng);
      eps = apply(eps, plan.rotation, plan.permutation);
    }
    const PointCloud xt = a * x0 + s * eps;
    NodeSet& dst = k < n_test ? test : train;
    (k < n_test ? test_f : train_f).push_back(distance_features(xt, cfg));
    for (int i = 0; i < mol.n_atoms(); ++i) {
      dst.labels.push_back(mol.types[static_cast<size_t>(i)]);
      dst.sizes.push_back(mol.n_atoms());
    }
  }
  const auto stack = [](const std::vector<Eigen::MatrixXd>& parts) {
    Eigen::Index rows = 0;
    for (const auto& p : parts) rows += p.rows();
    Eigen::MatrixXd out(rows, kDistanceFeatures);
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      out.middleRows(r, p.rows()) = p;
      r += p.rows();
    }
    return out;
  };
  train.features = stack(train_f);
  test.features = stack(test_f);

  // Standardize with training statistics.
  const Eigen::RowVectorXd mu = train.features.colwise().mean();
  Eigen::RowVectorXd sd = ((train.features.rowwise() - mu).array().square().colwise().mean()).sqrt();
  for (Eigen::Index c = 0; c < sd.size(); ++c)
    if (!(sd[c] > 1e-12)) sd[c] = 1.0;
  train.features = (train.features.rowwise() - mu).array().rowwise() / sd.array();
  test.features = (test.features.rowwise() - mu).array().rowwise() / sd.array();

  // Size-conditional type marginal from the training split, lightly smoothed.
  const int K = ds.layout.n_types();
  std::map<int, std::vector<double>> counts;
  for (size_t r = 0; r < train.labels.size(); ++r) {
    auto& c = counts[train.sizes[r]];
    if (c.empty()) c.assign(static_cast<size_t>(K), 0.0);
    c[static_cast<size_t>(train.labels[r])] += 1.0;
  }
  const auto offsets = [&](const NodeSet& set) {
    Eigen::MatrixXd off(static_cast<Eigen::Index>(set.labels.size()), K);
    for (size_t r = 0; r < set.labels.size(); ++r) {
      std::vector<double> c = counts.count(set.sizes[r]) ? counts[set.sizes[r]] : std::vector<double>(static_cast<size_t>(K), 0.0);
      const double total = std::accumulate(c.begin(), c.end(), 0.0) + 0.1 * K;
      for (int k = 0; k < K; ++k) off(static_cast<Eigen::Index>(r), k) = std::log((c[static_cast<size_t>(k)] + 0.1) / total);
    }
    return off;
  };
  const Eigen::MatrixXd off_train = offsets(train);
  const Eigen::MatrixXd off_test = offsets(test);

  OffsetLogistic model(kDistanceFeatures, K);
  model.fit(train.features, off_train, train.labels, cfg);
  const Eigen::MatrixXd lp = model.log_probs(test.features, off_test);

  std::vector<double> gains(test.labels.size());
  double baseline_entropy = 0.0;
  for (size_t r = 0; r < test.labels.size(); ++r) {
    const int y = test.labels[r];
    gains[r] = lp(static_cast<Eigen::Index>(r), y) - off_test(static_cast<Eigen::Index>(r), y);
    baseline_entropy -= off_test(static_cast<Eigen::Index>(r), y);
  }
  MiEstimate est;
  est.t = t;
  est.estimator = "classifier";
  est.entropy = baseline_entropy / static_cast<double>(test.labels.size());
  mean_and_error(gains, est.value, est.std_error);
  return est;
}

}  // namespace equifm
