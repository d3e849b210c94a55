#pragma once

// Run configuration shared by the command-line subcommands. A JSON object
// with the keys below; unknown keys are rejected. Every key can also be
// overridden from the command line as `--key value`.

#include "equifm/paths.hpp"
#include "equifm/sampling.hpp"
#include "equifm/training.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace equifm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // data
  std::string dataset = "toy";  // an XYZ path, or "toy" for the synthetic set
  int toy_molecules = 1000;
  std::uint64_t toy_seed = 0;

  // model and training
  std::uint64_t seed = 0;
  int hidden = 64;
  int layers = 3;
  int steps = 5000;
  int batch_size = 32;
  double learning_rate = 1e-4;
  int eot_restarts = 1;
  double t_min = kVpMinTime;
  std::string path_x = "eot";
  std::string path_h = "vp";
  std::string schedule_x = "linear";
  std::string schedule_h = "linear";
  double sigma_min = 1e-4;
  int threads = 1;

  // files
  std::string checkpoint = "model.eqfm";
  /// Also save the checkpoint every K steps (0: only at the end).
  int checkpoint_every = 0;
  std::string train_csv = "train_log.csv";
  std::string output_dir = "samples";
  std::string nfe_csv = "nfe.csv";
  std::string samples_dir = "samples";
  std::string bond_table;  // empty: the shipped QM9 table
  std::string report_csv = "report.csv";
  std::string mi_csv = "mi.csv";
  std::string bench_csv = "bench_eot.csv";

  // sampling
  int n_samples = 100;
  std::string integrator = "dopri5";
  int n_steps = 0;  // 0: the method's default
  double rtol = 1e-4;
  double atol = 1e-4;
  int max_nfe = 100000;

  // analysis
  int mi_grid = 20;
  int mi_n_mc = 4000;
  int classifier_steps = 2000;
  std::vector<int> bench_sizes{18, 50, 100, 150};
  int bench_trials = 100;

  /// Throws ConfigError naming the first unknown key or badly typed value.
  static RunConfig from_json_text(const std::string& text, const std::string& source = "<config>");
  static RunConfig from_file(const std::filesystem::path& path);
  /// `value` is read as JSON when it parses as JSON, otherwise as a string.
  /// Integer lists also accept comma-separated text.
  void set(const std::string& key, const std::string& value);
  std::string to_json_text() const;
  static std::vector<std::string> keys();

  ConditionalPath make_path(const std::string& kind, const std::string& schedule) const;
  HybridPath hybrid_path() const;
  TrainConfig train_config() const;
  IntegratorSpec integrator_spec() const;
  ModelDims model_dims(int feature_dim) const;
};

}  // namespace equifm
