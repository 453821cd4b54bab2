#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "shkan/expression.hpp"
#include "shkan/network.hpp"

namespace shkan {

struct RegressionTask {
  std::string name;
  Expression expression;
  int dim = 1;
  std::vector<double> lower;  // per dimension
  std::vector<double> upper;

  /// Box (0.1, 0.9)^dim unless given.
  static RegressionTask make(std::string name, const std::string& expression, int dim, double lo = 0.1,
                             double hi = 0.9);
  void validate() const;
};

/// Catalog lines: `name | expression | dim [| lo,hi]`. Blank lines and `#` comments are ignored.
std::vector<RegressionTask> parse_catalog(std::string_view text);
std::vector<RegressionTask> load_catalog(const std::filesystem::path& path);

/// Deterministic i.i.d. uniform draws from the task box. Draws with a
/// non-finite target are discarded; 10^6 in a row raise Error(kData, "degenerate task").
class TaskSampler : public SampleSource {
 public:
  TaskSampler(const RegressionTask& task, std::uint64_t seed);

  void next(std::span<double> x, std::span<double> target) override;
  std::uint64_t redrawn() const { return redrawn_; }

 private:
  const RegressionTask* task_;
  std::mt19937_64 rng_;
  std::uint64_t redrawn_ = 0;
};

Dataset sample_dataset(const RegressionTask& task, std::uint64_t seed, std::size_t count);

// ---------------------------------------------------------------------------
// MNIST in IDX format.

struct MnistSet {
  int rows = 28;
  int cols = 28;
  std::vector<double> images;  // count x rows x cols, scaled to [0,1]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  /// One-hot targets over the 10 classes.
  Dataset to_dataset() const;
};

/// Reads <dir>/{train,t10k}-{images-idx3,labels-idx1}-ubyte. Errors are
/// Error(kData) naming the file, with "missing file", "bad magic",
/// "truncation" or "label out of range".
std::pair<MnistSet, MnistSet> load_mnist(const std::filesystem::path& dir);
MnistSet load_mnist_pair(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Walks a dataset in a fresh seeded permutation each epoch.
class EpochSource : public SampleSource {
 public:
  EpochSource(const Dataset& data, std::uint64_t seed);
  void next(std::span<double> x, std::span<double> target) override;

 private:
  const Dataset* data_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace shkan
