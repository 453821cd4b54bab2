// Command-line front end. Talks to the engine only through the C API.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "shkan/shkan.h"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr int kExitConfig = SHKAN_E_CONFIG;
constexpr int kExitIo = SHKAN_E_IO;

struct RunOptions {
  std::string config;
  std::string out;
  long long seed = -1;
  long long samples = -1;
};

int report(int status) {
  if (status == SHKAN_OK) return 0;
  std::fprintf(stderr, "shkan: %s\n", shkan_last_error());
  return status == SHKAN_E_INTERNAL || status == SHKAN_E_ARGUMENT ? 1 : status;
}

int run(const std::string& kind, const RunOptions& opt) {
  json config = json::object();
  fs::path base;
  if (!opt.config.empty()) {
    std::ifstream in(opt.config);
    if (!in) {
      std::fprintf(stderr, "shkan: cannot open config %s\n", opt.config.c_str());
      return kExitIo;
    }
    try {
      config = json::parse(in);
    } catch (const json::exception& e) {
      std::fprintf(stderr, "shkan: config is not valid JSON: %s\n", e.what());
      return kExitConfig;
    }
    base = fs::absolute(opt.config).parent_path();
  }
  if (!config.is_object()) {
    std::fprintf(stderr, "shkan: config must be a JSON object\n");
    return kExitConfig;
  }
  if (opt.seed >= 0) config["train"]["seed"] = opt.seed;
  if (opt.samples >= 0) config["train"]["samples"] = opt.samples;

  std::string out = "out/" + kind;
  if (config.contains("output_dir") && config["output_dir"].is_string()) {
    out = config["output_dir"].get<std::string>();
    if (fs::path(out).is_relative() && !base.empty()) out = (base / out).string();
  }
  if (const char* env = std::getenv("SHKAN_OUTPUT_DIR"); env != nullptr && *env != '\0') out = env;
  if (!opt.out.empty()) out = opt.out;

  char* summary = nullptr;
  const std::string text = config.dump();
  const int status =
      shkan_run_experiment(kind.c_str(), text.c_str(), out.c_str(), base.empty() ? nullptr : base.c_str(), &summary);
  if (status == SHKAN_OK) {
    std::fputs(summary, stdout);
    std::fprintf(stderr, "shkan: artifacts written to %s\n", out.c_str());
    shkan_free_string(summary);
  }
  return report(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slash-Haar PATRICIA-tree function approximation and KAN training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(shkan_version()));

  RunOptions opt;
  std::string model;
  const char* kinds[][2] = {
      {"fit1d", "Fit one tree to a 1-D target and dump the fitted curve and derivative"},
      {"kan", "Train one KAN on one regression task"},
      {"suite", "Train every catalog task with shared hyper-parameters"},
      {"mnist", "Train a KAN classifier on MNIST IDX files"},
      {"bench", "Measure per-update cost against stored keys and precision"},
  };
  for (const auto& [name, help] : kinds) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", opt.config, "JSON run configuration");
    sub->add_option("--seed", opt.seed, "Base seed (weights, train and test seeds derive from it)");
    sub->add_option("--samples", opt.samples, "Number of training samples");
    sub->add_option("-o,--out", opt.out, "Output directory (overrides SHKAN_OUTPUT_DIR and the config)");
  }
  CLI::App* inspect = app.add_subcommand("inspect", "Print statistics of a saved tree or network model");
  inspect->add_option("model", model, "Model file (.shpt or .shkn)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (inspect->parsed()) {
    char* text = nullptr;
    const int status = shkan_inspect(model.c_str(), &text);
    if (status == SHKAN_OK) {
      std::fputs(text, stdout);
      shkan_free_string(text);
    }
    return report(status);
  }
  for (const auto& [name, help] : kinds)
    if (app.got_subcommand(name)) return run(name, opt);
  return kExitConfig;
}
