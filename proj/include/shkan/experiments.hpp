#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "shkan/network.hpp"

namespace shkan {

/// Runs one experiment from a JSON run configuration and writes its artifacts
/// to the output directory. Returns the run summary as JSON text.
///
/// `kind` is one of fit1d, kan, suite, mnist, bench. Relative paths in the
/// configuration (catalog, mnist.dir) resolve against `base_dir`.
std::string run_experiment(std::string_view kind, std::string_view config_json,
                           const std::filesystem::path& output_dir, const std::filesystem::path& base_dir = {});

/// Summary of a saved tree (SHPT) or network (SHKN) model as JSON text.
std::string inspect_model(const std::filesystem::path& path);

struct BenchRow {
  std::string sweep;  // "keys" or "precision"
  int precision = 0;
  std::uint64_t keys = 0;
  std::uint64_t updates = 0;
  double mean_nodes = 0.0;  // tree nodes visited per update
  double mean_bits = 0.0;   // stored edge bits walked per update
  double ns_per_update = 0.0;
};

struct BenchConfig {
  int key_sweep_precision = 48;
  std::vector<std::uint64_t> key_counts{256, 1024, 4096, 16384, 65536, 262144};
  std::uint64_t precision_sweep_keys = 65536;
  std::vector<int> precisions{8, 12, 16, 24, 32, 40, 48};
  std::uint64_t measured_updates = 20000;
  std::uint64_t seed = 1;
};

/// Per-update cost against the number of stored keys and against the precision.
std::vector<BenchRow> run_bench(const BenchConfig& cfg);

/// Least-squares fit y = a + b x with its coefficient of determination.
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace shkan
