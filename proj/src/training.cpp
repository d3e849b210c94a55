#include "equifm/training.hpp"

#include <chrono>
#include <cmath>
#include <thread>

namespace equifm {

Adam::Adam(Eigen::Index n, AdamOptions options)
    : opt_(options), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

void Adam::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw TrainingError("Adam: size mismatch");
  ++t_;
  m_ = opt_.beta1 * m_ + (1.0 - opt_.beta1) * grad;
  v_ = opt_.beta2 * v_ + (1.0 - opt_.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  params.array() -= opt_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + opt_.eps);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw TrainingError("batch_size must be at least 1");
  if (steps < 0) throw TrainingError("steps must be non-negative");
  if (!(adam.learning_rate > 0.0)) throw TrainingError("learning_rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw TrainingError("Adam betas must lie in [0, 1)");
  if (eot_restarts < 0) throw TrainingError("eot_restarts must be non-negative");
  if (!(t_min >= kVpMinTime && t_min < 1.0)) throw TrainingError("t_min must lie in [1e-5, 1)");
  if (threads < 1) throw TrainingError("threads must be at least 1");
  path.validate();
}

std::vector<TrainingSample> draw_training_samples(const std::vector<const MoleculeGeometry*>& batch,
                                                  const HybridPath& hp, const EotOptions& eot, double t_min, Rng& rng) {
  std::uniform_real_distribution<double> time(t_min, 1.0);
  std::vector<TrainingSample> out;
  out.reserve(batch.size());
  for (const MoleculeGeometry* g : batch) {
    const double t = time(rng);
    out.push_back(hybrid_training_sample(*g, t, hp, eot, rng));
  }
  return out;
}

namespace {

// Writes item b's loss into losses[b] and its gradient into grads.col(b).
void item_loss(const VectorFieldModel& m, const TrainingSample& s, double scale, double& loss,
               Eigen::Ref<Eigen::VectorXd> grad) {
  ForwardCache cache;
  const FieldOutput out = forward(m, s.g_t, s.t, &cache);
  FieldOutput upstream;
  upstream.vx = out.vx - s.u_x;
  upstream.vh = out.vh - s.u_h;
  loss = upstream.vx.squaredNorm() + upstream.vh.squaredNorm();
  upstream.vx *= 2.0 * scale;
  upstream.vh *= 2.0 * scale;
  grad.setZero();
  backward(m, cache, upstream, grad);
}

}  // namespace

LossResult loss_on_samples(const VectorFieldModel& m, const std::vector<TrainingSample>& samples, int threads) {
  if (samples.empty()) throw TrainingError("loss on an empty batch");
  const auto n_items = static_cast<Eigen::Index>(samples.size());
  const auto n_params = static_cast<Eigen::Index>(m.layout().total);
  const double scale = 1.0 / static_cast<double>(n_items);
  std::vector<double> losses(samples.size(), 0.0);
  Eigen::MatrixXd grads(n_params, n_items);

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n_items)));
  if (workers == 1) {
    for (Eigen::Index b = 0; b < n_items; ++b)
      item_loss(m, samples[static_cast<size_t>(b)], scale, losses[static_cast<size_t>(b)], grads.col(b));
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (Eigen::Index b = w; b < n_items; b += workers)
            item_loss(m, samples[static_cast<size_t>(b)], scale, losses[static_cast<size_t>(b)], grads.col(b));
        } catch (...) {
          errors[static_cast<size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // Fixed reduction order keeps results independent of the thread count.
  LossResult r;
  r.grad = Eigen::VectorXd::Zero(n_params);
  double eot_iters = 0.0;
  for (Eigen::Index b = 0; b < n_items; ++b) {
    r.loss += losses[static_cast<size_t>(b)];
    r.grad += grads.col(b);
    eot_iters += samples[static_cast<size_t>(b)].eot_iterations;
  }
  r.loss *= scale;
  r.mean_eot_iterations = eot_iters * scale;
  return r;
}

LossResult cfm_loss(const VectorFieldModel& m, const std::vector<const MoleculeGeometry*>& batch, const HybridPath& hp,
                    const EotOptions& eot, double t_min, Rng& rng, int threads) {
  if (batch.empty()) throw TrainingError("cfm_loss: empty batch");
  return loss_on_samples(m, draw_training_samples(batch, hp, eot, t_min, rng), threads);
}

TrainState::TrainState(VectorFieldModel model_in, const TrainConfig& cfg)
    : model(std::move(model_in)),
      optimizer(static_cast<Eigen::Index>(model.layout().total), cfg.adam),
      rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL) {}

StepReport train_step(TrainState& state, const std::vector<const MoleculeGeometry*>& batch, const TrainConfig& cfg) {
  EotOptions eot;
  eot.restarts = cfg.eot_restarts;
  const LossResult r = cfm_loss(state.model, batch, cfg.path, eot, cfg.t_min, state.rng, cfg.threads);
  if (!std::isfinite(r.loss) || !r.grad.allFinite())
    throw TrainingError("non-finite loss " + std::to_string(r.loss) + " at step " + std::to_string(state.step + 1));
  state.optimizer.step(state.model.mutable_parameters(), r.grad);
  if (!state.model.all_finite())
    throw TrainingError("parameters became non-finite at step " + std::to_string(state.step + 1));
  ++state.step;
  state.losses.push_back(r.loss);
  while (state.losses.size() > cfg.loss_history) state.losses.pop_front();
  return {state.step, r.loss, r.mean_eot_iterations};
}

std::vector<const MoleculeGeometry*> draw_batch(const Dataset& ds, int batch_size, Rng& rng) {
  if (ds.molecules.empty()) throw TrainingError("cannot draw a batch from an empty dataset");
  std::uniform_int_distribution<int> pick(0, ds.size() - 1);
  std::vector<const MoleculeGeometry*> batch;
  batch.reserve(static_cast<size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) batch.push_back(&ds.molecules[static_cast<size_t>(pick(rng))]);
  return batch;
}

std::vector<TrainLogRow> train(TrainState& state, const Dataset& ds, const TrainConfig& cfg,
                               const std::function<void(const TrainState&, const TrainLogRow&)>& on_step) {
  cfg.validate();
  if (ds.layout.dim() != state.model.dims().feature_dim)
    throw TrainingError("dataset feature width " + std::to_string(ds.layout.dim()) + " does not match the model");
  std::vector<TrainLogRow> log;
  log.reserve(static_cast<size_t>(cfg.steps));
  const auto start = std::chrono::steady_clock::now();
  for (int s = 0; s < cfg.steps; ++s) {
    const auto batch = draw_batch(ds, cfg.batch_size, state.rng);
    const StepReport rep = train_step(state, batch, cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.push_back({rep.step, rep.loss, wall, rep.mean_eot_iterations});
    if (on_step) on_step(state, log.back());
  }
  return log;
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
  if (window == 0) throw TrainingError("moving_average: window must be positive");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    sum += values[k];
    if (k >= window) sum -= values[k - window];
    out[k] = sum / static_cast<double>(std::min(k + 1, window));
  }
  return out;
}

TargetNormStats target_norm_stats(const std::vector<std::pair<PointCloud, PointCloud>>& pairs, AlignmentKind kind,
                                  double sigma_min, const EotOptions& eot, Rng& rng) {
  if (pairs.size() < 2) throw TrainingError("target_norm_stats needs at least two pairs");
  std::vector<double> norms;
  norms.reserve(pairs.size());
  for (const auto& [x1_raw, x0_raw] : pairs) {
    const PointCloud x1 = project_zero_com(x1_raw);
    const PointCloud x0 = project_zero_com(x0_raw);
    PointCloud aligned = x1;
    if (kind == AlignmentKind::Eot) {
      const EotPlan plan = solve_eot(x1, x0, eot, rng);
      aligned = apply(x1, plan.rotation, plan.permutation);
    }
    norms.push_back(((1.0 - sigma_min) * aligned - x0).norm());
  }
  TargetNormStats st;
  st.n = static_cast<int>(norms.size());
  for (double v : norms) st.mean += v;
  st.mean /= st.n;
  for (double v : norms) st.variance += (v - st.mean) * (v - st.mean);
  st.variance /= (st.n - 1);
  return st;
}

TargetNormStats alignment_variance_probe(const std::vector<PointCloud>& clouds, AlignmentKind kind, int n_pairs,
                                         double sigma_min, const EotOptions& eot, Rng& rng) {
  if (clouds.empty()) throw TrainingError("alignment_variance_probe: no clouds");
  if (n_pairs < 30) throw TrainingError("alignment_variance_probe needs at least 30 pairs");
  std::vector<std::pair<PointCloud, PointCloud>> pairs;
  pairs.reserve(static_cast<size_t>(n_pairs));
  for (int k = 0; k < n_pairs; ++k) {
    const PointCloud& x0 = clouds[static_cast<size_t>(k) % clouds.size()];
    pairs.emplace_back(gaussian_cloud(static_cast<int>(x0.rows()), rng), x0);
  }
  return target_norm_stats(pairs, kind, sigma_min, eot, rng);
}

}  // namespace equifm
