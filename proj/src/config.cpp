#include "equifm/config.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace equifm {

namespace {

using nlohmann::json;

struct Field {
  std::function<void(RunConfig&, const json&)> read;
  std::function<json(const RunConfig&)> write;
};

template <typename T>
Field field(T RunConfig::*member) {
  return {[member](RunConfig& c, const json& v) { c.*member = v.get<T>(); },
          [member](const RunConfig& c) { return json(c.*member); }};
}

const std::map<std::string, Field>& registry() {
  static const std::map<std::string, Field> r = {
      {"dataset", field(&RunConfig::dataset)},
      {"toy_molecules", field(&RunConfig::toy_molecules)},
      {"toy_seed", field(&RunConfig::toy_seed)},
      {"seed", field(&RunConfig::seed)},
      {"hidden", field(&RunConfig::hidden)},
      {"layers", field(&RunConfig::layers)},
      {"steps", field(&RunConfig::steps)},
      {"batch_size", field(&RunConfig::batch_size)},
      {"checkpoint_every", field(&RunConfig::checkpoint_every)},
      {"learning_rate", field(&RunConfig::learning_rate)},
      {"eot_restarts", field(&RunConfig::eot_restarts)},
      {"t_min", field(&RunConfig::t_min)},
      {"path_x", field(&RunConfig::path_x)},
      {"path_h", field(&RunConfig::path_h)},
      {"schedule_x", field(&RunConfig::schedule_x)},
      {"schedule_h", field(&RunConfig::schedule_h)},
      {"sigma_min", field(&RunConfig::sigma_min)},
      {"threads", field(&RunConfig::threads)},
      {"checkpoint", field(&RunConfig::checkpoint)},
      {"train_csv", field(&RunConfig::train_csv)},
      {"output_dir", field(&RunConfig::output_dir)},
      {"nfe_csv", field(&RunConfig::nfe_csv)},
      {"samples_dir", field(&RunConfig::samples_dir)},
      {"bond_table", field(&RunConfig::bond_table)},
      {"report_csv", field(&RunConfig::report_csv)},
      {"mi_csv", field(&RunConfig::mi_csv)},
      {"bench_csv", field(&RunConfig::bench_csv)},
      {"n_samples", field(&RunConfig::n_samples)},
      {"integrator", field(&RunConfig::integrator)},
      {"n_steps", field(&RunConfig::n_steps)},
      {"rtol", field(&RunConfig::rtol)},
      {"atol", field(&RunConfig::atol)},
      {"max_nfe", field(&RunConfig::max_nfe)},
      {"mi_grid", field(&RunConfig::mi_grid)},
      {"mi_n_mc", field(&RunConfig::mi_n_mc)},
      {"classifier_steps", field(&RunConfig::classifier_steps)},
      {"bench_sizes", field(&RunConfig::bench_sizes)},
      {"bench_trials", field(&RunConfig::bench_trials)},
  };
  return r;
}

void assign(RunConfig& c, const std::string& key, const json& value, const std::string& where) {
  const auto it = registry().find(key);
  if (it == registry().end()) throw ConfigError(where + ": unknown config key '" + key + "'");
  // Reject silent conversions (a string where a number belongs, a float for an int).
  const json current = it->second.write(c);
  const bool ok = (current.is_string() && value.is_string()) ||
                  (current.is_number_integer() && value.is_number_integer()) ||
                  (current.is_number_float() && value.is_number()) ||
                  (current.is_array() && value.is_array() &&
                   std::all_of(value.begin(), value.end(), [](const json& e) { return e.is_number_integer(); }));
  if (!ok) throw ConfigError(where + ": key '" + key + "' expects " + std::string(current.type_name()) +
                             ", got " + value.dump());
  if (current.is_number_unsigned() && value.is_number_integer() && value.get<long long>() < 0)
    throw ConfigError(where + ": key '" + key + "' must be non-negative");
  try {
    it->second.read(c, value);
  } catch (const json::exception& e) {
    throw ConfigError(where + ": key '" + key + "': " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(source + ": the top level must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : doc.items()) assign(c, key, value, source);
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = registry().find(key);
  if (it == registry().end()) throw ConfigError("unknown option --" + key);
  const json current = it->second.write(*this);
  json parsed;
  if (current.is_string()) {
    parsed = value;
  } else if (current.is_array() && value.find('[') == std::string::npos) {
    parsed = json::array();
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        parsed.push_back(v);
      } catch (const std::exception&) {
        throw ConfigError("--" + key + ": expected comma-separated integers, got '" + value + "'");
      }
    }
  } else {
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      throw ConfigError("--" + key + ": cannot parse '" + value + "'");
    }
  }
  assign(*this, key, parsed, "--" + key);
}

std::string RunConfig::to_json_text() const {
  json doc = json::object();
  for (const auto& [key, f] : registry()) doc[key] = f.write(*this);
  return doc.dump(2);
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, f] : registry()) out.push_back(key);
  return out;
}

ConditionalPath RunConfig::make_path(const std::string& kind, const std::string& schedule) const {
  try {
    if (kind == "ot") return ConditionalPath::ot(sigma_min);
    if (kind == "eot") return ConditionalPath::eot(sigma_min);
    if (kind == "vp") return ConditionalPath::vp(NoiseSchedule::of_kind(parse_schedule_kind(schedule)));
  } catch (const PathError& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown path kind '" + kind + "' (expected ot, vp or eot)");
}

HybridPath RunConfig::hybrid_path() const {
  HybridPath hp;
  hp.path_x = make_path(path_x, schedule_x);
  hp.path_h = make_path(path_h, schedule_h);
  try {
    hp.validate();
  } catch (const PathError& e) {
    throw ConfigError(e.what());
  }
  return hp;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.batch_size = batch_size;
  t.steps = steps;
  t.adam.learning_rate = learning_rate;
  t.path = hybrid_path();
  t.seed = seed;
  t.eot_restarts = eot_restarts;
  t.t_min = t_min;
  t.threads = threads;
  try {
    t.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return t;
}

IntegratorSpec RunConfig::integrator_spec() const {
  try {
    IntegratorSpec s = IntegratorSpec::for_method(parse_integrator(integrator));
    if (n_steps != 0) s.n_steps = n_steps;
    s.rtol = rtol;
    s.atol = atol;
    s.max_nfe = max_nfe;
    s.validate();
    return s;
  } catch (const SamplingError& e) {
    throw ConfigError(e.what());
  }
}

ModelDims RunConfig::model_dims(int feature_dim) const {
  if (hidden < 1 || layers < 1) throw ConfigError("hidden and layers must be positive");
  ModelDims d;
  d.n_layers = layers;
  d.hidden = hidden;
  d.feature_dim = feature_dim;
  return d;
}

}  // namespace equifm
