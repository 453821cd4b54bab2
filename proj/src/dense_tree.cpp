#include "shkan/dense_tree.hpp"

#include <algorithm>
#include <cmath>

#include "shkan/error.hpp"

namespace shkan {
namespace {

inline unsigned key_bit(std::uint64_t bits, int precision, int depth) {
  return static_cast<unsigned>((bits >> (precision - 1 - depth)) & 1U);
}

void check_delta(std::span<const double> delta, int out_dim) {
  if (delta.size() != static_cast<std::size_t>(out_dim))
    fail(ErrorKind::kInvalidArgument, "delta length differs from output dimension");
  for (double v : delta)
    if (!std::isfinite(v)) fail(ErrorKind::kNumeric, "divergent update");
}

}  // namespace

DenseTree::DenseTree(BasisProfile profile, int out_dim)
    : profile_(std::move(profile)), precision_(profile_.depth_count()), out_dim_(out_dim) {
  if (out_dim_ < 1) fail(ErrorKind::kInvalidArgument, "tree output dimension must be positive");
  if (precision_ < 1 || precision_ > kMaxPrecision)
    fail(ErrorKind::kInvalidArgument, "dense tree supports 1..24 bits of precision");
  bias_.assign(static_cast<std::size_t>(out_dim_), 0.0);
  levels_.resize(static_cast<std::size_t>(precision_));
  for (int d = 0; d < precision_; ++d)
    levels_[static_cast<std::size_t>(d)].assign((std::size_t{1} << d) * static_cast<std::size_t>(out_dim_), 0.0);
}

void DenseTree::check_code(const UnitCode& code) const {
  if (code.precision != precision_) fail(ErrorKind::kInvalidArgument, "precision mismatch");
}

PredictResult DenseTree::predict(const UnitCode& code) const {
  PredictResult result;
  result.y.resize(static_cast<std::size_t>(out_dim_));
  result.dy_du.resize(static_cast<std::size_t>(out_dim_));
  predict_into(code, result.y, result.dy_du);
  return result;
}

void DenseTree::predict_into(const UnitCode& code, std::span<double> y, std::span<double> dy_du) const {
  check_code(code);
  std::copy(bias_.begin(), bias_.end(), y.begin());
  std::fill(dy_du.begin(), dy_du.end(), 0.0);
  double t = code.u;
  for (int d = 0; d < precision_; ++d) {
    const BasisKind kind = profile_.kind_at(d);
    const double amp = profile_.amplitude_at(d);
    const double value = basis_detail::forward_value(kind, amp, t);
    const double slope = basis_detail::forward_slope(kind, amp, d);
    const double* w = levels_[static_cast<std::size_t>(d)].data() + slot(d, code.bits);
    for (int j = 0; j < out_dim_; ++j) {
      y[static_cast<std::size_t>(j)] += w[j] * value;
      dy_du[static_cast<std::size_t>(j)] += w[j] * slope;
    }
    t += t;
    if (t >= 1.0) t -= 1.0;
  }
}

void DenseTree::update(const UnitCode& code, std::span<const double> delta, double rate) {
  check_code(code);
  check_delta(delta, out_dim_);
  if (!(rate > 0.0) || !std::isfinite(rate)) fail(ErrorKind::kInvalidArgument, "learning rate must be positive");
  const double gain = rate * profile_.update_gain();
  for (int j = 0; j < out_dim_; ++j) bias_[static_cast<std::size_t>(j)] += gain * delta[static_cast<std::size_t>(j)];
  for (int d = 0; d < precision_; ++d) {
    const double r = basis_detail::update_value(profile_.kind_at(d), profile_.amplitude_at(d),
                                                key_bit(code.bits, precision_, d));
    double* w = levels_[static_cast<std::size_t>(d)].data() + slot(d, code.bits);
    for (int j = 0; j < out_dim_; ++j) w[j] += gain * delta[static_cast<std::size_t>(j)] * r;
  }
}

void DenseTree::adam_step(const UnitCode& code, std::span<const double> delta, const AdamHyper& hyper,
                          std::uint64_t step) {
  check_code(code);
  check_delta(delta, out_dim_);
  if (step < 1) fail(ErrorKind::kInvalidArgument, "adam step index starts at 1");
  if (!(hyper.beta1 >= 0.0 && hyper.beta1 < 1.0) || !(hyper.beta2 >= 0.0 && hyper.beta2 < 1.0))
    fail(ErrorKind::kInvalidArgument, "adam decay rates must lie in [0, 1)");
  if (!(hyper.alpha > 0.0) || !(hyper.epsilon > 0.0))
    fail(ErrorKind::kInvalidArgument, "adam step size and epsilon must be positive");

  if (!adam_) {
    AdamState state;
    state.m.resize(levels_.size());
    state.v.resize(levels_.size());
    for (std::size_t d = 0; d < levels_.size(); ++d) {
      state.m[d].assign(levels_[d].size(), 0.0);
      state.v[d].assign(levels_[d].size(), 0.0);
    }
    state.bias_m.assign(bias_.size(), 0.0);
    state.bias_v.assign(bias_.size(), 0.0);
    adam_ = std::move(state);
  }
  AdamState& state = *adam_;

  const double t = static_cast<double>(step);
  const double correct1 = 1.0 - std::pow(hyper.beta1, t);
  const double correct2 = 1.0 - std::pow(hyper.beta2, t);
  auto apply = [&](double& theta, double& m, double& v, double grad) {
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * grad;
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * grad * grad;
    const double m_hat = m / correct1;
    const double v_hat = v / correct2;
    theta -= hyper.alpha * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  };

  for (std::size_t j = 0; j < bias_.size(); ++j) apply(bias_[j], state.bias_m[j], state.bias_v[j], -delta[j]);
  for (int d = 0; d < precision_; ++d) {
    const double r = basis_detail::update_value(profile_.kind_at(d), profile_.amplitude_at(d),
                                                key_bit(code.bits, precision_, d));
    const std::size_t base = slot(d, code.bits);
    auto& level = levels_[static_cast<std::size_t>(d)];
    auto& m = state.m[static_cast<std::size_t>(d)];
    auto& v = state.v[static_cast<std::size_t>(d)];
    for (int j = 0; j < out_dim_; ++j) {
      const std::size_t s = base + static_cast<std::size_t>(j);
      apply(level[s], m[s], v[s], -delta[static_cast<std::size_t>(j)] * r);
    }
  }
}

double DenseTree::coefficient(const NodePath& b, int output) const {
  if (b.depth < 0 || b.depth >= precision_) fail(ErrorKind::kInvalidArgument, "depth overflow");
  if (output < 0 || output >= out_dim_) fail(ErrorKind::kInvalidArgument, "output index out of range");
  return levels_[static_cast<std::size_t>(b.depth)][static_cast<std::size_t>(b.bits) * static_cast<std::size_t>(out_dim_) +
                                                    static_cast<std::size_t>(output)];
}

}  // namespace shkan
