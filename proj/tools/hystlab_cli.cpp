// Command-line driver. Talks to the library only through the C API.
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hystlab/hystlab.h"

using nlohmann::json;

namespace {

using CommandFn = hyst_status (*)(const char*, char**);

struct Command {
  CLI::App* app = nullptr;
  CommandFn fn = nullptr;
  std::map<std::string, std::string> text;    // option key -> value
  std::map<std::string, double> numbers;
  std::map<std::string, std::uint64_t> integers;
  std::map<std::string, bool> flags;
};

// Registers --name; the JSON key is the name with dashes turned into underscores.
std::string key_of(const std::string& name) {
  std::string k = name;
  for (auto& c : k)
    if (c == '-') c = '_';
  return k;
}

void text(Command& c, const std::string& name, const std::string& help) {
  c.app->add_option("--" + name, c.text[key_of(name)], help);
}
void number(Command& c, const std::string& name, const std::string& help) {
  c.app->add_option("--" + name, c.numbers[key_of(name)], help);
}
void integer(Command& c, const std::string& name, const std::string& help) {
  c.app->add_option("--" + name, c.integers[key_of(name)], help);
}
void flag(Command& c, const std::string& name, const std::string& help) {
  c.app->add_flag("--" + name, c.flags[key_of(name)], help);
}

json options_of(const Command& c) {
  json o = json::object();
  auto given = [&](const std::string& key) {
    std::string name = key;
    for (auto& ch : name)
      if (ch == '_') ch = '-';
    return c.app->count("--" + name) > 0;
  };
  for (const auto& [k, v] : c.text)
    if (given(k)) o[k] = v;
  for (const auto& [k, v] : c.numbers)
    if (given(k)) o[k] = v;
  for (const auto& [k, v] : c.integers)
    if (given(k)) o[k] = v;
  for (const auto& [k, v] : c.flags)
    if (v) o[k] = true;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hystlab: hysteresis-factor estimation pipeline"};
  app.require_subcommand(1);
  std::map<std::string, Command> cmds;

  auto add = [&](const std::string& name, const std::string& desc, CommandFn fn) -> Command& {
    Command& c = cmds[name];
    c.app = app.add_subcommand(name, desc);
    c.fn = fn;
    integer(c, "seed", "random seed");
    text(c, "out", "output path");
    return c;
  };

  {
    auto& c = add("generate", "write a synthetic fleet", hyst_generate);
    text(c, "spec", "fleet spec JSON (default: preset)");
    text(c, "preset", "built-in fleet preset A or B");
    integer(c, "n-cycles", "override the number of cycles");
    integer(c, "threads", "worker threads");
  }
  {
    auto& c = add("harmonize", "standardize, segment and featurize a fleet", hyst_harmonize);
    text(c, "fleet", "fleet directory or manifest");
    text(c, "mode", "stats or tensor");
    text(c, "L", "window length in 10 Hz steps, or all");
    integer(c, "T", "resampled steps (tensor mode)");
    number(c, "relax-min-s", "minimum relaxation before a correction, seconds");
    number(c, "relax-threshold", "relaxation current threshold, amperes");
    integer(c, "threads", "worker threads");
  }
  {
    auto& c = add("train", "fit a pipeline and save the model", hyst_train);
    text(c, "model", "lqr, qxgb or qgru");
    text(c, "dimred", "pca, freg or none");
    text(c, "config", "training config JSON");
    text(c, "data", "harmonized data directory");
  }
  {
    auto& c = add("evaluate", "score a saved model", hyst_evaluate);
    text(c, "model", "model file");
    text(c, "data", "harmonized data directory");
    text(c, "split", "train, val, test or all");
    flag(c, "oracle-debug", "use the true labels as predictions");
  }
  {
    auto& c = add("grid", "run the experiment grids", hyst_grid);
    text(c, "config", "run configuration JSON");
    integer(c, "threads", "worker threads");
  }
  {
    auto& c = add("transfer", "run transfer strategies between fleets", hyst_transfer);
    text(c, "config", "run configuration JSON");
    text(c, "strategy", "bb, ab, ftb or joint");
    text(c, "scaler", "old or new");
    integer(c, "threads", "worker threads");
  }
  {
    auto& c = add("report", "rebuild report tables from a run directory", hyst_report);
    text(c, "in", "run directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return 2;
  }

  for (auto& [name, c] : cmds) {
    if (!c.app->parsed()) continue;
    const json opts = options_of(c);
    char* summary = nullptr;
    const hyst_status st = c.fn(opts.dump().c_str(), &summary);
    if (st != HYST_OK) {
      std::cerr << "hystlab " << name << ": " << hyst_status_name(st) << ": " << hyst_last_error() << "\n";
      return 1;
    }
    if (summary) std::cout << summary << "\n";
    hyst_free_string(summary);
    return 0;
  }
  return 2;
}
