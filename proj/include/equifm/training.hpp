#pragma once

// Conditional flow matching over the hybrid path: each batch item draws its
// own t ~ U[t_min, 1] and fresh noise, builds (g_t, u_x, u_h) and regresses
// the network onto both targets with a squared error.

#include "equifm/data.hpp"
#include "equifm/paths.hpp"
#include "equifm/vectorfield.hpp"

#include <deque>
#include <functional>
#include <stdexcept>
#include <vector>

namespace equifm {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(Eigen::Index n, AdamOptions options);
  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad);
  long steps() const { return t_; }
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }

 private:
  AdamOptions opt_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

struct TrainConfig {
  int batch_size = 32;
  int steps = 5000;
  AdamOptions adam{};
  HybridPath path{};
  std::uint64_t seed = 0;
  int eot_restarts = 1;
  double t_min = kVpMinTime;
  std::size_t loss_history = 1024;
  /// Batch items are processed on this many threads; results do not depend on it.
  int threads = 1;

  void validate() const;
};

struct LossResult {
  double loss = 0.0;
  Eigen::VectorXd grad;
  double mean_eot_iterations = 0.0;
};

/// Per-item t, noise and (when path_x is EOT) alignment, drawn serially from rng.
std::vector<TrainingSample> draw_training_samples(const std::vector<const MoleculeGeometry*>& batch,
                                                  const HybridPath& hp, const EotOptions& eot, double t_min, Rng& rng);

/// mean_b |vx - u_x|^2 + |vh - u_h|^2 and its parameter gradient.
LossResult loss_on_samples(const VectorFieldModel& m, const std::vector<TrainingSample>& samples, int threads = 1);

LossResult cfm_loss(const VectorFieldModel& m, const std::vector<const MoleculeGeometry*>& batch, const HybridPath& hp,
                    const EotOptions& eot, double t_min, Rng& rng, int threads = 1);

struct TrainState {
  VectorFieldModel model;
  Adam optimizer;
  long step = 0;
  std::deque<double> losses;  // most recent first-to-last, capped at TrainConfig::loss_history
  Rng rng;

  TrainState(VectorFieldModel model, const TrainConfig& cfg);
};

struct StepReport {
  long step = 0;
  double loss = 0.0;
  double mean_eot_iterations = 0.0;
};

StepReport train_step(TrainState& state, const std::vector<const MoleculeGeometry*>& batch, const TrainConfig& cfg);

/// Uniform draws with replacement.
std::vector<const MoleculeGeometry*> draw_batch(const Dataset& ds, int batch_size, Rng& rng);

struct TrainLogRow {
  long step = 0;
  double loss = 0.0;
  double wall_seconds = 0.0;
  double mean_eot_iterations = 0.0;
};

/// Runs cfg.steps steps on `ds`. `on_step` (optional) sees every row after the update.
std::vector<TrainLogRow> train(TrainState& state, const Dataset& ds, const TrainConfig& cfg,
                               const std::function<void(const TrainState&, const TrainLogRow&)>& on_step = {});

/// Trailing moving average; entry k averages values[max(0, k-window+1) .. k].
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

enum class AlignmentKind { Eot, Random };

struct TargetNormStats {
  double mean = 0.0;
  double variance = 0.0;
  int n = 0;
};

/// |u_x| with u_x = (1 - sigma_min) aligned(x1) - x0 over explicit (x1, x0) pairs.
TargetNormStats target_norm_stats(const std::vector<std::pair<PointCloud, PointCloud>>& pairs, AlignmentKind kind,
                                  double sigma_min, const EotOptions& eot, Rng& rng);

/// Same statistic over n_pairs draws: x0 cycles through `clouds` and x1 is a
/// fresh standard-normal cloud.
TargetNormStats alignment_variance_probe(const std::vector<PointCloud>& clouds, AlignmentKind kind, int n_pairs,
                                         double sigma_min, const EotOptions& eot, Rng& rng);

}  // namespace equifm
