#include "commands.hpp"

#include "equifm/alignment.hpp"
#include "equifm/checkpoint.hpp"
#include "equifm/information.hpp"
#include "equifm/metrics.hpp"
#include "equifm/sampling.hpp"
#include "equifm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace equifm::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_csv(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(10);
  return out;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.dataset == "toy") return synthetic_toy_dataset(cfg.toy_molecules, cfg.toy_seed);
  if (!fs::exists(cfg.dataset)) throw ConfigError("dataset file does not exist: " + cfg.dataset);
  return read_xyz(cfg.dataset);
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  const TrainConfig tc = cfg.train_config();
  const Dataset ds = load_dataset(cfg);
  TrainState state(VectorFieldModel(cfg.model_dims(ds.layout.dim()), cfg.seed), tc);
  std::ofstream csv = open_csv(cfg.train_csv);
  csv << "step,loss,loss_ma100,wall_seconds,mean_eot_iterations\n";
  std::vector<double> losses;
  double window = 0.0;
  const long report_every = std::max(1, tc.steps / 10);
  train(state, ds, tc, [&](const TrainState& st, const TrainLogRow& row) {
    losses.push_back(row.loss);
    window += row.loss;
    if (losses.size() > 100) window -= losses[losses.size() - 101];
    const double ma = window / static_cast<double>(std::min<std::size_t>(losses.size(), 100));
    csv << row.step << ',' << row.loss << ',' << ma << ',' << row.wall_seconds << ',' << row.mean_eot_iterations << '\n';
    if (row.step % report_every == 0) log << "step " << row.step << "  loss(ma100) " << ma << '\n';
    if (cfg.checkpoint_every > 0 && row.step % cfg.checkpoint_every == 0)
      save_checkpoint(st.model, ds.layout, cfg.checkpoint);
  });
  save_checkpoint(state.model, ds.layout, cfg.checkpoint);
  log << "wrote " << cfg.checkpoint << " after " << state.step << " steps\n";
}

void cmd_sample(const RunConfig& cfg, std::ostream& log) {
  const IntegratorSpec spec = cfg.integrator_spec();
  if (cfg.n_samples < 0) throw ConfigError("n_samples must be non-negative");
  const Checkpoint ck = load_checkpoint(cfg.checkpoint);
  const ModelDims want = cfg.model_dims(ck.layout.dim());
  if (!(ck.model.dims() == want))
    throw ConfigError("checkpoint dimensions (layers " + std::to_string(ck.model.dims().n_layers) + ", hidden " +
                      std::to_string(ck.model.dims().hidden) + ") do not match the config (layers " +
                      std::to_string(want.n_layers) + ", hidden " + std::to_string(want.hidden) + ")");
  const Dataset ds = load_dataset(cfg);
  if (!(ds.layout == ck.layout))
    throw ConfigError("dataset feature layout does not match the checkpoint (width " + std::to_string(ds.layout.dim()) +
                      " vs " + std::to_string(ck.layout.dim()) + ")");

  Rng rng(cfg.seed);
  const std::vector<int> sizes = draw_node_counts(ds.size_histogram, cfg.n_samples, rng);
  const SampleSet set = sample_batch(ck.model, cfg.n_samples, sizes, spec, ck.layout, rng);

  fs::create_directories(cfg.output_dir);
  std::ofstream per = open_csv((fs::path(cfg.output_dir) / "nfe_per_sample.csv").string());
  per << "sample,n_nodes,nfe\n";
  for (int s = 0; s < cfg.n_samples; ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04d.xyz", s);
    write_xyz({set.molecules[static_cast<size_t>(s)]}, fs::path(cfg.output_dir) / name, ck.layout);
    per << s << ',' << sizes[static_cast<size_t>(s)] << ',' << set.nfe[static_cast<size_t>(s)] << '\n';
  }
  std::ofstream hist = open_csv(cfg.nfe_csv);
  hist << "bin_lo,bin_hi,nfe\n";
  for (int b = 0; b < kNfeBins; ++b)
    hist << static_cast<double>(b) / kNfeBins << ',' << static_cast<double>(b + 1) / kNfeBins << ','
         << set.nfe_by_interval[static_cast<size_t>(b)] << '\n';
  log << "wrote " << cfg.n_samples << " samples to " << cfg.output_dir << "  nfe_total " << set.nfe_total << '\n';
}

void cmd_eval(const RunConfig& cfg, std::ostream& log) {
  const BondTable table = cfg.bond_table.empty() ? BondTable::shipped() : BondTable::load(cfg.bond_table);
  if (!fs::is_directory(cfg.samples_dir)) throw std::runtime_error("not a directory: " + cfg.samples_dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(cfg.samples_dir))
    if (e.is_regular_file() && e.path().extension() == ".xyz") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Molecule> mols;
  for (const auto& f : files) {
    auto part = read_xyz_molecules(f);
    mols.insert(mols.end(), part.begin(), part.end());
  }
  if (mols.empty()) throw std::runtime_error("no molecules found in " + cfg.samples_dir);
  const StabilityReport r = stability(mols, table);
  std::ofstream csv = open_csv(cfg.report_csv);
  csv << stability_csv(r);
  log << "molecules " << r.n_molecules << "  atom_stable " << r.atom_stable_fraction << "  mol_stable "
      << r.mol_stable_fraction << "  unique " << r.unique_fraction << '\n';
}

void cmd_analyze_mi(const RunConfig& cfg, std::ostream& log) {
  const Dataset ds = load_dataset(cfg);
  const std::vector<double> grid = unit_grid(cfg.mi_grid);
  const ConditionalPath px = cfg.make_path(cfg.path_x, cfg.schedule_x);
  struct Curve {
    std::string name;
    ConditionalPath path;
  };
  const std::vector<Curve> curves = {{"vp_linear", ConditionalPath::vp(NoiseSchedule::linear())},
                                     {"vp_cosine", ConditionalPath::vp(NoiseSchedule::cosine())},
                                     {"vp_polynomial", ConditionalPath::vp(NoiseSchedule::polynomial())},
                                     {"ot", ConditionalPath::ot(cfg.sigma_min)}};
  ClassifierConfig cc;
  cc.steps = cfg.classifier_steps;
  cc.seed = cfg.seed;

  std::ofstream csv = open_csv(cfg.mi_csv);
  csv << "t,mi_xh,mi_xh_stderr";
  for (const auto& c : curves) csv << ',' << c.name << ',' << c.name << "_stderr";
  csv << '\n';
  std::vector<double> xh;
  std::vector<std::vector<double>> hh(curves.size());
  for (double t : grid) {
    const MiEstimate ex = mi_xh(ds, px, t, cc);
    xh.push_back(ex.normalized());
    csv << t << ',' << ex.normalized() << ',' << ex.std_error / ex.entropy;
    for (std::size_t c = 0; c < curves.size(); ++c) {
      Rng rng(cfg.seed);  // same draws at every t
      const MiEstimate e = mi_hh(ds, curves[c].path, t, cfg.mi_n_mc, rng);
      hh[c].push_back(e.normalized());
      csv << ',' << e.normalized() << ',' << e.std_error / e.entropy;
    }
    csv << '\n';
  }
  for (std::size_t c = 0; c < curves.size(); ++c) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) d2 += (hh[c][i] - xh[i]) * (hh[c][i] - xh[i]);
    log << curves[c].name << "  L2 distance to mi_xh " << std::sqrt(d2) << '\n';
  }
  log << "wrote " << cfg.mi_csv << '\n';
}

void cmd_bench_eot(const RunConfig& cfg, std::ostream& log) {
  if (cfg.bench_trials < 10) throw ConfigError("bench_trials must be at least 10");
  if (cfg.bench_sizes.empty()) throw ConfigError("bench_sizes is empty");
  for (int n : cfg.bench_sizes)
    if (n < 1) throw ConfigError("bench_sizes entries must be positive");
  EotOptions opt;
  opt.restarts = cfg.eot_restarts;
  Rng rng(cfg.seed);
  std::ofstream csv = open_csv(cfg.bench_csv);
  csv << "n,trials,mean_ms,std_ms,mean_iterations,std_iterations\n";
  for (int n : cfg.bench_sizes) {
    std::vector<double> ms, iters;
    for (int k = 0; k < cfg.bench_trials; ++k) {
      const PointCloud z = project_zero_com(gaussian_cloud(n, rng));
      const PointCloud y = project_zero_com(gaussian_cloud(n, rng));
      const auto t0 = std::chrono::steady_clock::now();
      const EotPlan plan = solve_eot(z, y, opt, rng);
      ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      iters.push_back(plan.iterations);
    }
    csv << n << ',' << cfg.bench_trials << ',' << mean(ms) << ',' << stddev(ms) << ',' << mean(iters) << ','
        << stddev(iters) << '\n';
    log << "n " << n << "  mean " << mean(ms) << " ms  iterations " << mean(iters) << '\n';
  }
}

}  // namespace equifm::cli
