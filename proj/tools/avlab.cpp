// Command line driver: one subcommand per experiment kind plus run and verify.
// Flags are generated from the config schema, so every flag mirrors a config key.

#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "avlab/cli.hpp"

namespace {

using avlab::cli::json;
namespace fs = std::filesystem;

std::string flag_of(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

json parse_flag(const avlab::cli::Key& k, const std::string& s) {
  using avlab::cli::Type;
  auto fail = [&]() { return avlab::ConfigError("flag " + flag_of(k.name) + ": cannot read '" + s + "'"); };
  try {
    switch (k.type) {
      case Type::number:
        return std::stod(s);
      case Type::integer: {
        std::size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw fail();
        return v;
      }
      case Type::optional_number:
        if (s == "null" || s == "auto") return nullptr;
        return std::stod(s);
      case Type::boolean:
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        throw fail();
      case Type::string:
        return s;
      case Type::numbers: {
        json a = json::array();
        std::stringstream is(s);
        for (std::string item; std::getline(is, item, ',');)
          if (!item.empty()) a.push_back(std::stod(item));
        return a;
      }
    }
  } catch (const std::invalid_argument&) {
    throw fail();
  } catch (const std::out_of_range&) {
    throw fail();
  }
  return nullptr;
}

struct StageCommand {
  std::string kind;
  CLI::App* app = nullptr;
  std::string config;
  long long seed = -1;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
};

void add_stage(CLI::App& parent, const std::string& name, const std::string& verb, const std::string& kind,
               std::vector<std::unique_ptr<StageCommand>>& cmds) {
  CLI::App* group = parent.add_subcommand(name, name + " commands");
  group->require_subcommand(1);
  auto c = std::make_unique<StageCommand>();
  c->kind = kind;
  c->app = group->add_subcommand(verb, kind + " stage");
  c->app->add_option("--config", c->config, "JSON config: a full stage or the " + kind + " block");
  c->app->add_option("--seed", c->seed, "RNG seed");
  for (auto& k : avlab::cli::schema(kind)) {
    if (k.type == avlab::cli::Type::boolean) {
      c->app->add_flag(flag_of(k.name), c->flags[k.name], k.help);
    } else {
      std::string help = k.help + (k.def.is_null() ? "" : " [" + k.def.dump() + "]");
      c->app->add_option(flag_of(k.name), c->values[k.name], help);
    }
  }
  cmds.push_back(std::move(c));
}

json stage_config(StageCommand& c) {
  json stage{{"kind", c.kind}};
  if (!c.config.empty()) {
    json f = avlab::cli::load_json(c.config);
    if (f.contains("kind")) {
      if (f["kind"] != c.kind) throw avlab::ConfigError(c.config + " holds a '" + f["kind"].get<std::string>() + "' stage");
      stage = f;
    } else {
      stage[c.kind] = f;
    }
  }
  json& block = stage[c.kind];
  if (block.is_null()) block = json::object();
  for (auto& k : avlab::cli::schema(c.kind)) {
    auto* opt = c.app->get_option(flag_of(k.name));
    if (!opt->count()) continue;
    block[k.name] = k.type == avlab::cli::Type::boolean ? json(c.flags[k.name]) : parse_flag(k, c.values[k.name]);
  }
  if (c.seed >= 0) stage["seed"] = c.seed;
  // --out splits into the output directory and the file name
  if (block.contains("out") && c.app->get_option("--out")->count()) {
    fs::path p(block["out"].get<std::string>());
    stage["out_dir"] = p.parent_path().empty() ? "." : p.parent_path().string();
    block["out"] = p.filename().string();
  }
  return stage;
}

int run(int argc, char** argv) {
  CLI::App app{"anomalous-dissipation and spontaneous-stochasticity laboratory"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<StageCommand>> cmds;
  add_stage(app, "field", "build", "field", cmds);
  add_stage(app, "scalar", "run", "scalar", cmds);
  add_stage(app, "tracers", "run", "tracers", cmds);
  add_stage(app, "cascade", "scan", "cascade", cmds);
  add_stage(app, "besov", "scan", "besov", cmds);
  add_stage(app, "spst", "run", "spst", cmds);

  std::string run_config, preset, out_dir = ".";
  auto* runner = app.add_subcommand("run", "run a config file or a preset, writing manifest.json");
  auto* cfg_opt = runner->add_option("--config", run_config, "JSON config: one stage or an array of stages");
  auto* pre_opt = runner->add_option("--preset", preset, "desk-anomalous or cascade-fractal");
  runner->add_option("--out-dir", out_dir, "output directory for presets and the manifest");
  cfg_opt->excludes(pre_opt);

  std::string manifest;
  auto* verifier = app.add_subcommand("verify", "recompute output hashes and rerun the cheap checks");
  verifier->add_option("manifest", manifest, "manifest JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(avlab::ErrorKind::config);
  }

  if (verifier->parsed()) {
    auto r = avlab::cli::verify(manifest);
    for (auto& p : r.problems) std::cerr << p << "\n";
    std::cout << (r.ok ? "verify: pass" : "verify: FAIL") << "\n";
    return r.exit_code();
  }
  if (runner->parsed()) {
    json cfg;
    if (!preset.empty()) {
      cfg = avlab::cli::preset(preset, out_dir);
    } else if (!run_config.empty()) {
      cfg = avlab::cli::load_json(run_config);
    } else {
      throw avlab::ConfigError("run needs --config or --preset");
    }
    auto m = avlab::cli::run_config(cfg, fs::path(out_dir) / "manifest.json");
    std::cout << "wrote " << m["outputs"].size() << " outputs, manifest " << (fs::path(out_dir) / "manifest.json").string() << "\n";
    return 0;
  }
  for (auto& c : cmds) {
    if (!c->app->parsed()) continue;
    json stage = avlab::cli::normalize_stage(stage_config(*c));
    fs::path dir = stage["out_dir"].get<std::string>();
    std::string out = stage[c->kind]["out"];
    fs::path mpath = dir / (fs::path(out).stem().string() + ".manifest.json");
    auto m = avlab::cli::run_config(stage, mpath);
    for (auto& o : m["outputs"]) std::cout << (mpath.parent_path() / o["path"].get<std::string>()).string() << "\n";
    return 0;
  }
  return static_cast<int>(avlab::ErrorKind::config);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const avlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(avlab::ErrorKind::io);
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(avlab::ErrorKind::config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
