#include "shkan/network.hpp"

#include <tbb/parallel_for.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "shkan/binary_io.hpp"
#include "shkan/error.hpp"

namespace shkan {

namespace {

constexpr std::uint32_t kNetworkVersion = 1;

std::size_t usize(int v) { return static_cast<std::size_t>(v); }

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double d : v) s += d * d;
  return s;
}

void write_codec(ByteWriter& out, const CodecConfig& c) {
  out.put_u8(static_cast<std::uint8_t>(c.kind));
  out.put_u32(static_cast<std::uint32_t>(c.sign_bits));
  out.put_u32(static_cast<std::uint32_t>(c.exponent_bits));
  out.put_u32(static_cast<std::uint32_t>(c.significand_bits));
  out.put_u32(static_cast<std::uint32_t>(c.fixed_bits));
}

CodecConfig read_codec(ByteReader& in) {
  CodecConfig c;
  const std::uint8_t kind = in.get_u8();
  if (kind > 1) fail(ErrorKind::kData, "unknown codec kind in model");
  c.kind = static_cast<CodecKind>(kind);
  c.sign_bits = static_cast<int>(in.get_u32());
  c.exponent_bits = static_cast<int>(in.get_u32());
  c.significand_bits = static_cast<int>(in.get_u32());
  c.fixed_bits = static_cast<int>(in.get_u32());
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kData, std::string("bad codec in model: ") + e.what());
  }
  return c;
}

}  // namespace

std::string_view to_string(ResidualMode mode) { return mode == ResidualMode::kIdentity ? "identity" : "none"; }

ResidualMode residual_mode_from_string(std::string_view name) {
  if (name == "identity") return ResidualMode::kIdentity;
  if (name == "none") return ResidualMode::kNone;
  fail(ErrorKind::kConfig, "unknown residual mode '" + std::string(name) + "'");
}

std::string_view to_string(StepRule rule) { return rule == StepRule::kNormalized ? "normalized" : "plain"; }

StepRule step_rule_from_string(std::string_view name) {
  if (name == "normalized") return StepRule::kNormalized;
  if (name == "plain") return StepRule::kPlain;
  fail(ErrorKind::kConfig, "unknown step rule '" + std::string(name) + "'");
}

NetworkSpec NetworkSpec::uniform(std::vector<int> widths, ResidualMode residual, const CodecConfig& codec) {
  NetworkSpec spec;
  spec.widths = std::move(widths);
  spec.residual = residual;
  if (spec.widths.size() >= 2) spec.layers.assign(spec.widths.size() - 1, LayerSpec{codec, default_profile(codec)});
  return spec;
}

void NetworkSpec::validate() const {
  if (widths.size() < 2) fail(ErrorKind::kConfig, "network needs at least an input and an output width");
  for (int w : widths)
    if (w < 1) fail(ErrorKind::kConfig, "layer widths must be positive");
  if (layers.size() != widths.size() - 1) fail(ErrorKind::kConfig, "need one layer spec per tree layer");
  for (const auto& layer : layers) {
    layer.codec.validate();
    if (layer.profile.depth_count() != layer.codec.precision())
      fail(ErrorKind::kConfig, "basis profile depth must equal the codec precision");
  }
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
    std::vector<PatriciaTree> trees;
    trees.reserve(usize(spec_.widths[l]));
    for (int i = 0; i < spec_.widths[l]; ++i) trees.emplace_back(spec_.layers[l].profile, spec_.widths[l + 1]);
    layers_.push_back(std::move(trees));
  }
  deltas_.resize(spec_.widths.size());
  for (std::size_t l = 0; l < spec_.widths.size(); ++l) deltas_[l].assign(usize(spec_.widths[l]), 0.0);
}

void Network::initialize(std::uint64_t seed, double scale) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) fail(ErrorKind::kConfig, "init scale must be finite and >= 0");
  if (scale == 0.0) return;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> draw(-scale, scale);
  for (auto& layer : layers_)
    for (auto& tree : layer) {
      std::vector<double> bias(usize(tree.out_dim()));
      for (auto& b : bias) b = draw(rng);
      tree.set_bias(bias);
    }
}

void Network::layer_predict(int l, LayerTape& lt) const {
  const int n_out = spec_.widths[usize(l) + 1];
  const auto& trees = layers_[usize(l)];
  auto one = [&](std::size_t i) {
    trees[i].predict_into(lt.codes[i], std::span<double>(lt.y).subspan(i * usize(n_out), usize(n_out)),
                          std::span<double>(lt.dy).subspan(i * usize(n_out), usize(n_out)));
  };
  if (parallel_ && trees.size() > 1) {
    tbb::parallel_for(std::size_t{0}, trees.size(), one);
  } else {
    for (std::size_t i = 0; i < trees.size(); ++i) one(i);
  }
}

bool Network::forward(std::span<const double> x, ForwardTape& tape, ForwardMode mode) const {
  if (x.size() != usize(input_dim())) fail(ErrorKind::kInvalidArgument, "input length does not match the network");
  const std::size_t n_layers = layers_.size();
  tape.layers.resize(n_layers);
  std::vector<double> current(x.begin(), x.end());
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int n_in = spec_.widths[l];
    const int n_out = spec_.widths[l + 1];
    const CodecConfig& codec = spec_.layers[l].codec;
    LayerTape& lt = tape.layers[l];
    lt.x = current;
    lt.codes.resize(usize(n_in));
    lt.dg.resize(usize(n_in));
    lt.y.resize(usize(n_in) * usize(n_out));
    lt.dy.resize(usize(n_in) * usize(n_out));
    for (int i = 0; i < n_in; ++i) {
      const double v = lt.x[usize(i)];
      if (std::isnan(v)) fail(ErrorKind::kNumeric, "NaN in forward pass");
      if (std::isinf(v)) {
        if (mode == ForwardMode::kTrain) return false;
        lt.codes[usize(i)] = encode_lenient(v, codec);
        lt.dg[usize(i)] = 0.0;
      } else {
        lt.codes[usize(i)] = encode(v, codec);
        lt.dg[usize(i)] = encode_derivative(v, codec);
      }
    }
    layer_predict(static_cast<int>(l), lt);
    current.assign(usize(n_out), 0.0);
    const bool residual = spec_.residual == ResidualMode::kIdentity;
    for (int i = 0; i < n_in; ++i) {
      const double* yi = lt.y.data() + usize(i) * usize(n_out);
      const double skip = residual ? lt.x[usize(i)] : 0.0;
      for (int j = 0; j < n_out; ++j) current[usize(j)] += yi[j] + skip;
    }
  }
  tape.output = std::move(current);
  for (double v : tape.output) {
    if (std::isnan(v)) fail(ErrorKind::kNumeric, "NaN in forward pass");
    if (std::isinf(v) && mode == ForwardMode::kTrain) return false;
  }
  return true;
}

std::vector<double> Network::predict(std::span<const double> x) const {
  ForwardTape tape;
  forward(x, tape, ForwardMode::kEvaluate);
  return tape.output;
}

StepResult Network::backward_and_update(ForwardTape& tape, std::span<const double> target, double alpha,
                                        StepRule rule) {
  if (target.size() != usize(output_dim())) fail(ErrorKind::kInvalidArgument, "target length does not match");
  if (!(alpha > 0.0)) fail(ErrorKind::kConfig, "learning rate must be > 0");
  const std::size_t n_layers = layers_.size();
  StepResult result;

  auto& top = deltas_[n_layers];
  for (std::size_t j = 0; j < top.size(); ++j) top[j] = target[j] - tape.output[j];
  const double top_norm = squared_norm(top);
  result.loss = 0.5 * top_norm;
  if (!std::isfinite(top_norm)) return result;  // skipped
  if (top_norm == 0.0) {
    result.outcome = StepOutcome::kUnchanged;
    return result;
  }

  // Errors at every hidden boundary, computed before any tree changes.
  const bool residual = spec_.residual == ResidualMode::kIdentity;
  for (std::size_t l = n_layers; l-- > 1;) {
    const LayerTape& lt = tape.layers[l];
    const auto& upper = deltas_[l + 1];
    auto& lower = deltas_[l];
    const std::size_t n_out = upper.size();
    for (std::size_t i = 0; i < lower.size(); ++i) {
      const double* dyi = lt.dy.data() + i * n_out;
      double sum = 0.0;
      for (std::size_t j = 0; j < n_out; ++j) sum += upper[j] * (dyi[j] * lt.dg[i] + (residual ? 1.0 : 0.0));
      lower[i] = sum;
    }
    if (!all_finite(lower)) return result;
  }

  double rate = alpha;
  if (rule == StepRule::kNormalized) {
    // First-order change of the output error if every tree moved its own output by rate * delta.
    double response = 0.0;
    for (std::size_t l = 0; l < n_layers; ++l)
      response += static_cast<double>(layers_[l].size()) * squared_norm(deltas_[l + 1]);
    rate = alpha * top_norm / response;
    if (!std::isfinite(rate) || rate <= 0.0) return result;
  }

  for (std::size_t l = 0; l < n_layers; ++l) {
    const LayerTape& lt = tape.layers[l];
    const auto& delta = deltas_[l + 1];
    if (squared_norm(delta) == 0.0) continue;
    for (std::size_t i = 0; i < layers_[l].size(); ++i) layers_[l][i].update(lt.codes[i], delta, rate);
  }
  result.outcome = StepOutcome::kApplied;
  return result;
}

StepResult Network::train_step(std::span<const double> x, std::span<const double> target, double alpha,
                               StepRule rule) {
  thread_local ForwardTape tape;
  if (!forward(x, tape, ForwardMode::kTrain)) return {};
  return backward_and_update(tape, target, alpha, rule);
}

std::vector<double> Network::model_derivative(std::span<const double> x, int input_index) const {
  if (input_index < 0 || input_index >= input_dim()) fail(ErrorKind::kInvalidArgument, "input index out of range");
  ForwardTape tape;
  forward(x, tape, ForwardMode::kEvaluate);
  std::vector<double> tangent(usize(input_dim()), 0.0);
  tangent[usize(input_index)] = 1.0;
  const bool residual = spec_.residual == ResidualMode::kIdentity;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerTape& lt = tape.layers[l];
    const std::size_t n_out = usize(spec_.widths[l + 1]);
    std::vector<double> next(n_out, 0.0);
    for (std::size_t i = 0; i < tangent.size(); ++i) {
      if (tangent[i] == 0.0) continue;
      const double* dyi = lt.dy.data() + i * n_out;
      for (std::size_t j = 0; j < n_out; ++j) next[j] += (dyi[j] * lt.dg[i] + (residual ? 1.0 : 0.0)) * tangent[i];
    }
    tangent = std::move(next);
  }
  return tangent;
}

std::size_t Network::node_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_)
    for (const auto& tree : layer) n += tree.node_count();
  return n;
}

std::size_t Network::memory_bytes() const {
  std::size_t n = 0;
  for (const auto& layer : layers_)
    for (const auto& tree : layer) n += tree.memory_bytes();
  return n;
}

std::vector<std::uint8_t> Network::serialize() const {
  ByteWriter out;
  out.put_tag("SHKN");
  out.put_u32(kNetworkVersion);
  out.put_u32(static_cast<std::uint32_t>(spec_.widths.size()));
  for (int w : spec_.widths) out.put_u32(static_cast<std::uint32_t>(w));
  out.put_u8(static_cast<std::uint8_t>(spec_.residual));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    write_codec(out, spec_.layers[l].codec);
    for (const auto& tree : layers_[l]) tree.write(out);
  }
  const std::uint64_t sum = fnv1a64(out.bytes());
  out.put_u64(sum);
  return out.take();
}

Network Network::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) fail(ErrorKind::kData, "truncated model data");
  const auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.last(8));
  if (tail.get_u64() != fnv1a64(body)) fail(ErrorKind::kData, "model checksum mismatch (corrupt or truncated file)");
  ByteReader in(body);
  if (!in.tag_is("SHKN")) fail(ErrorKind::kData, "not a network model file");
  const std::uint32_t version = in.get_u32();
  if (version != kNetworkVersion) fail(ErrorKind::kData, "unsupported network model version " + std::to_string(version));
  const std::uint32_t count = in.get_u32();
  if (count < 2 || count > 4096) fail(ErrorKind::kData, "bad layer count in model");
  NetworkSpec spec;
  for (std::uint32_t k = 0; k < count; ++k) spec.widths.push_back(static_cast<int>(in.get_u32()));
  const std::uint8_t residual = in.get_u8();
  if (residual > 1) fail(ErrorKind::kData, "bad residual mode in model");
  spec.residual = static_cast<ResidualMode>(residual);
  std::vector<std::vector<PatriciaTree>> layers;
  for (std::uint32_t l = 0; l + 1 < count; ++l) {
    const CodecConfig codec = read_codec(in);
    std::vector<PatriciaTree> trees;
    for (int i = 0; i < spec.widths[l]; ++i) {
      trees.push_back(PatriciaTree::read(in));
      if (trees.back().out_dim() != spec.widths[l + 1]) fail(ErrorKind::kData, "tree output width mismatch");
    }
    spec.layers.push_back({codec, trees.front().profile()});
    layers.push_back(std::move(trees));
  }
  if (in.remaining() != 0) fail(ErrorKind::kData, "trailing bytes after network model");
  Network net(spec);
  net.layers_ = std::move(layers);
  return net;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) fail(ErrorKind::kConfig, "alpha must be finite and > 0");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) fail(ErrorKind::kConfig, "init_scale must be >= 0");
  if (checkpoints_per_decade < 0) fail(ErrorKind::kConfig, "checkpoints_per_decade must be >= 0");
}

bool is_checkpoint(std::uint64_t step, const TrainConfig& cfg) {
  if (step == 0) return true;
  if (cfg.eval_interval > 0) return step % cfg.eval_interval == 0;
  std::uint64_t decade = 1;
  while (decade <= step / 10) decade *= 10;
  std::uint64_t interval = std::max<std::uint64_t>(1, decade / 10);
  if (cfg.checkpoints_per_decade > 0) {
    // Coarsen so that at most checkpoints_per_decade points fall in [decade, 10 decade).
    const std::uint64_t span = decade * 9;
    const std::uint64_t minimum = (span + static_cast<std::uint64_t>(cfg.checkpoints_per_decade) - 1) /
                                  static_cast<std::uint64_t>(cfg.checkpoints_per_decade);
    while (interval < minimum) interval *= 10;
    if (interval > decade) interval = decade;
  }
  return step % interval == 0;
}

double evaluate_rmse(const Network& net, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  ForwardTape tape;
  double sum = 0.0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    net.forward(data.input(s), tape, ForwardMode::kEvaluate);
    const auto t = data.target(s);
    for (std::size_t j = 0; j < t.size(); ++j) {
      const double e = t[j] - tape.output[j];
      sum += e * e;
    }
  }
  return std::sqrt(sum / static_cast<double>(data.size() * usize(data.out_dim)));
}

double evaluate_accuracy(const Network& net, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  if (data.labels.size() != data.size()) fail(ErrorKind::kData, "accuracy needs one label per sample");
  ForwardTape tape;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    net.forward(data.input(s), tape, ForwardMode::kEvaluate);
    const auto best = std::max_element(tape.output.begin(), tape.output.end()) - tape.output.begin();
    if (best == data.labels[s]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainReport train(Network& net, SampleSource& source, const Dataset& test, const TrainConfig& cfg,
                  const CheckpointCallback& on_checkpoint) {
  cfg.validate();
  if (test.size() > 0 && (test.in_dim != net.input_dim() || test.out_dim != net.output_dim()))
    fail(ErrorKind::kConfig, "test set shape does not match the network");
  const auto started = std::chrono::steady_clock::now();
  if (cfg.initialize) net.initialize(cfg.weight_seed, cfg.init_scale);
  net.set_parallel(cfg.parallel);

  const bool accuracy = cfg.metric == Metric::kAccuracy;
  auto metric = [&] { return accuracy ? evaluate_accuracy(net, test) : evaluate_rmse(net, test); };
  auto better = [&](double a, double b) { return accuracy ? a > b : a < b; };

  TrainReport report;
  double window_sum = 0.0;
  std::uint64_t window_count = 0;
  auto checkpoint = [&](std::uint64_t step) {
    CurvePoint point;
    point.step = step;
    point.train_rmse =
        window_count == 0 ? 0.0 : std::sqrt(window_sum / static_cast<double>(window_count * usize(net.output_dim())));
    point.test_metric = metric();
    point.nodes = net.node_count();
    point.skipped = report.skipped;
    window_sum = 0.0;
    window_count = 0;
    if (step == 0) {
      report.initial_metric = point.test_metric;
      report.best_metric = point.test_metric;
    } else if (better(point.test_metric, report.best_metric)) {
      report.best_metric = point.test_metric;
      report.best_step = step;
    }
    report.final_metric = point.test_metric;
    report.curve.push_back(point);
    if (on_checkpoint) on_checkpoint(point);
  };

  checkpoint(0);
  std::vector<double> x(usize(net.input_dim())), t(usize(net.output_dim()));
  ForwardTape tape;
  for (std::uint64_t step = 1; step <= cfg.samples; ++step) {
    source.next(x, t);
    ++report.presented;
    bool skipped = false;
    try {
      if (net.forward(x, tape, ForwardMode::kTrain)) {
        const StepResult r = net.backward_and_update(tape, t, cfg.alpha, cfg.step_rule);
        if (r.outcome == StepOutcome::kSkipped) {
          skipped = true;
        } else {
          window_sum += 2.0 * r.loss;
          ++window_count;
        }
      } else {
        skipped = true;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNumeric || cfg.abort_on_nan) throw;
      skipped = true;
    }
    if (skipped) {
      ++report.skipped;
    } else {
      ++report.processed;
    }
    if (step == cfg.samples || is_checkpoint(step, cfg)) checkpoint(step);
  }

  report.nodes = net.node_count();
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace shkan
