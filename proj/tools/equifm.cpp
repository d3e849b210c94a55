// equifm: command-line front end.
//
//   equifm <train|sample|eval|analyze-mi|bench-eot> [--config file.json] [--key value ...]
//
// Exit status: 0 on success, 1 for usage or configuration errors, 2 when a
// command fails at run time. EQUIFM_THREADS sets the training thread count.

#include "commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

using namespace equifm;

namespace {

RunConfig resolve(const std::string& config_path, const std::vector<std::string>& extras) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
  if (const char* env = std::getenv("EQUIFM_THREADS"); env != nullptr && *env != '\0') cfg.set("threads", env);
  for (std::size_t k = 0; k < extras.size(); ++k) {
    const std::string& arg = extras[k];
    if (arg.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + arg + "'");
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (k + 1 >= extras.size()) throw ConfigError("option --" + key + " needs a value");
      value = extras[++k];
    }
    std::replace(key.begin(), key.end(), '-', '_');
    cfg.set(key, value);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equivariant flow matching for 3D molecules"};
  app.require_subcommand(1);
  std::string config_path;
  bool print_config = false;

  struct Command {
    const char* name;
    const char* help;
    void (*run)(const RunConfig&, std::ostream&);
  };
  const Command commands[] = {
      {"train", "train a vector-field model and write a checkpoint", cli::cmd_train},
      {"sample", "generate molecules from a checkpoint", cli::cmd_sample},
      {"eval", "stability and uniqueness of XYZ samples", cli::cmd_eval},
      {"analyze-mi", "information-alignment curves over t", cli::cmd_analyze_mi},
      {"bench-eot", "time the alignment solver on random clouds", cli::cmd_bench_eot},
  };
  std::vector<CLI::App*> subs;
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("-c,--config", config_path, "JSON config file");
    sub->add_flag("--print-config", print_config, "print the resolved config and exit");
    sub->allow_extras();
    sub->footer("Any config key can be given as --key value. Keys: " + [] {
      std::string s;
      for (const auto& k : RunConfig::keys()) s += (s.empty() ? "" : ", ") + k;
      return s;
    }());
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    RunConfig cfg;
    try {
      cfg = resolve(config_path, subs[i]->remaining());
    } catch (const std::exception& e) {
      std::cerr << "equifm " << commands[i].name << ": " << e.what() << '\n';
      return cli::kExitUsage;
    }
    if (print_config) {
      std::cout << cfg.to_json_text() << '\n';
      return cli::kExitOk;
    }
    try {
      commands[i].run(cfg, std::cout);
    } catch (const ConfigError& e) {
      std::cerr << "equifm " << commands[i].name << ": " << e.what() << '\n';
      return cli::kExitUsage;
    } catch (const std::exception& e) {
      std::cerr << "equifm " << commands[i].name << ": " << e.what() << '\n';
      return cli::kExitRuntime;
    }
  }
  return cli::kExitOk;
}
