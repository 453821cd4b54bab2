#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shkan/basis.hpp"
#include "shkan/codec.hpp"
#include "shkan/patricia_tree.hpp"

namespace shkan {

enum class ResidualMode : std::uint8_t { kNone = 0, kIdentity = 1 };

// Scaling of the per-sample step shared by every tree of the network.
enum class StepRule : std::uint8_t {
  kPlain = 0,       // each tree steps with alpha
  kNormalized = 1,  // alpha divided by the first-order output response of all updates together
};

std::string_view to_string(ResidualMode mode);
ResidualMode residual_mode_from_string(std::string_view name);
std::string_view to_string(StepRule rule);
StepRule step_rule_from_string(std::string_view name);

struct LayerSpec {
  CodecConfig codec;
  BasisProfile profile;

  bool operator==(const LayerSpec&) const = default;
};

/// Widths [n_0, ..., n_L]. Layer l owns n_l trees, each with n_{l+1} outputs.
struct NetworkSpec {
  std::vector<int> widths;
  ResidualMode residual = ResidualMode::kIdentity;
  std::vector<LayerSpec> layers;  // one per tree layer (widths.size() - 1)

  /// Same codec for every layer with its default profile.
  static NetworkSpec uniform(std::vector<int> widths, ResidualMode residual, const CodecConfig& codec);

  void validate() const;
  bool operator==(const NetworkSpec&) const = default;
};

struct LayerTape {
  std::vector<double> x;        // layer input, n_l
  std::vector<UnitCode> codes;  // n_l
  std::vector<double> dg;       // codec derivative at x, n_l
  std::vector<double> y;        // tree outputs, row i holds tree i (n_l x n_{l+1})
  std::vector<double> dy;       // dy/du, same layout
};

/// Everything backward needs; reused across samples to avoid allocation.
struct ForwardTape {
  std::vector<LayerTape> layers;
  std::vector<double> output;
};

enum class ForwardMode {
  kTrain,     // an infinite intermediate makes forward report failure
  kEvaluate,  // infinities are encoded through their bit pattern and the pass continues
};

enum class StepOutcome { kApplied, kUnchanged, kSkipped };

struct StepResult {
  StepOutcome outcome = StepOutcome::kSkipped;
  double loss = 0.0;  // 1/2 |target - y|^2 before the update
};

class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  int input_dim() const { return spec_.widths.front(); }
  int output_dim() const { return spec_.widths.back(); }
  int layer_count() const { return static_cast<int>(layers_.size()); }

  PatriciaTree& tree(int layer, int index) { return layers_[layer][index]; }
  const PatriciaTree& tree(int layer, int index) const { return layers_[layer][index]; }

  /// Draws every tree bias uniformly from [-scale, scale]. Scale 0 keeps the all-zero start.
  void initialize(std::uint64_t seed, double scale);

  /// Runs tree predicts of one layer concurrently. Results are identical either way.
  void set_parallel(bool enabled) { parallel_ = enabled; }

  /// Returns false when training mode meets an infinite intermediate. NaN
  /// raises Error(kNumeric) in either mode.
  bool forward(std::span<const double> x, ForwardTape& tape, ForwardMode mode) const;
  std::vector<double> predict(std::span<const double> x) const;

  /// Error propagation through the tape followed by the tree updates. Every
  /// layer error is computed before any tree changes. A non-finite error
  /// skips the sample.
  StepResult backward_and_update(ForwardTape& tape, std::span<const double> target, double alpha, StepRule rule);

  /// forward + backward_and_update. An infinite intermediate skips the sample.
  StepResult train_step(std::span<const double> x, std::span<const double> target, double alpha, StepRule rule);

  /// d output / d x_i by forward-mode differentiation through the tape.
  std::vector<double> model_derivative(std::span<const double> x, int input_index) const;

  std::size_t node_count() const;
  std::size_t memory_bytes() const;

  std::vector<std::uint8_t> serialize() const;
  static Network deserialize(std::span<const std::uint8_t> bytes);

 private:
  void layer_predict(int l, LayerTape& lt) const;

  NetworkSpec spec_;
  std::vector<std::vector<PatriciaTree>> layers_;
  bool parallel_ = false;
  std::vector<std::vector<double>> deltas_;  // scratch, one per layer boundary
};

// ---------------------------------------------------------------------------
// Data and training loop.

/// Row-major fixed-size dataset. `labels` is filled for classification sets.
struct Dataset {
  int in_dim = 0;
  int out_dim = 0;
  std::vector<double> inputs;
  std::vector<double> targets;
  std::vector<int> labels;

  std::size_t size() const { return in_dim == 0 ? 0 : inputs.size() / static_cast<std::size_t>(in_dim); }
  std::span<const double> input(std::size_t i) const {
    return {inputs.data() + i * static_cast<std::size_t>(in_dim), static_cast<std::size_t>(in_dim)};
  }
  std::span<const double> target(std::size_t i) const {
    return {targets.data() + i * static_cast<std::size_t>(out_dim), static_cast<std::size_t>(out_dim)};
  }
};

/// Endless stream of training samples.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual void next(std::span<double> x, std::span<double> target) = 0;
};

enum class Metric { kRmse, kAccuracy };

struct TrainConfig {
  double alpha = 1.0;
  StepRule step_rule = StepRule::kNormalized;
  std::uint64_t samples = 0;
  std::uint64_t weight_seed = 1;
  double init_scale = 0.0;
  bool abort_on_nan = true;
  Metric metric = Metric::kRmse;
  // 0 selects the log-spaced cadence (interval 10^floor(log10 step) / 10).
  std::uint64_t eval_interval = 0;
  // Upper bound on checkpoints per decade under the log-spaced cadence; 0 keeps every one.
  int checkpoints_per_decade = 0;
  bool parallel = false;
  bool initialize = true;  // apply weight_seed/init_scale before training

  void validate() const;
};

struct CurvePoint {
  std::uint64_t step = 0;
  double train_rmse = 0.0;  // over samples since the previous checkpoint, pre-update errors
  double test_metric = 0.0;
  std::size_t nodes = 0;
  std::uint64_t skipped = 0;
};

struct TrainReport {
  std::uint64_t presented = 0;
  std::uint64_t processed = 0;
  std::uint64_t skipped = 0;
  double initial_metric = 0.0;
  double final_metric = 0.0;
  double best_metric = 0.0;
  std::uint64_t best_step = 0;
  std::size_t nodes = 0;
  double wall_seconds = 0.0;
  std::vector<CurvePoint> curve;
};

/// True when step (1-based) is a checkpoint of the cadence in `cfg`.
bool is_checkpoint(std::uint64_t step, const TrainConfig& cfg);

/// RMSE over every output of every sample.
double evaluate_rmse(const Network& net, const Dataset& data);
/// Fraction of samples whose argmax output (lowest index on ties) equals the label.
double evaluate_accuracy(const Network& net, const Dataset& data);

using CheckpointCallback = std::function<void(const CurvePoint&)>;

/// Sample-by-sample stochastic gradient ascent. The test metric is recorded at
/// step 0, at every checkpoint and at the final step.
TrainReport train(Network& net, SampleSource& source, const Dataset& test, const TrainConfig& cfg,
                  const CheckpointCallback& on_checkpoint = {});

}  // namespace shkan
