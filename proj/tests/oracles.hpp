#pragma once

// Test-only reference implementations built from the public closed-form basis
// functions, independent of the tree code paths they check.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "shkan/basis.hpp"
#include "shkan/codec.hpp"

namespace shkan::oracle {

/// Explicit map from every visited node path to its coefficient vector.
class PathMapApproximator {
 public:
  PathMapApproximator(BasisProfile profile, int out_dim)
      : profile_(std::move(profile)), out_dim_(out_dim), bias_(static_cast<std::size_t>(out_dim), 0.0) {}

  void update(const UnitCode& code, const std::vector<double>& delta, double rate) {
    double energy = 1.0;
    for (int d = 0; d < profile_.depth_count(); ++d) energy += std::pow(profile_.amplitude(d), 2);
    const double gain = profile_.normalization() == StepNormalization::kPathEnergy ? rate / energy : rate;
    for (int j = 0; j < out_dim_; ++j) bias_[j] += gain * delta[j];
    for (int d = 0; d < profile_.depth_count(); ++d) {
      const NodePath b = path_of(code, d);
      const double value = profile_.kind(d) == BasisKind::kConstant ? profile_.amplitude(d)
                                                                      : haar_eval(b, code.u, profile_);
      auto& w = coeffs_[{b.depth, b.bits}];
      w.resize(static_cast<std::size_t>(out_dim_), 0.0);
      for (int j = 0; j < out_dim_; ++j) w[j] += gain * delta[j] * value;
    }
  }

  std::pair<std::vector<double>, std::vector<double>> predict(const UnitCode& code) const {
    std::vector<double> y = bias_;
    std::vector<double> dy(static_cast<std::size_t>(out_dim_), 0.0);
    for (int d = 0; d < profile_.depth_count(); ++d) {
      const NodePath b = path_of(code, d);
      const auto it = coeffs_.find({b.depth, b.bits});
      if (it == coeffs_.end()) continue;
      double value = 0.0, slope = 0.0;
      switch (profile_.kind(d)) {
        case BasisKind::kHaar:
          value = haar_eval(b, code.u, profile_);
          break;
        case BasisKind::kSlash:
          value = slash_eval(b, code.u, profile_);
          slope = slash_derivative(b, code.u, profile_);
          break;
        case BasisKind::kConstant:
          value = profile_.amplitude(d);
          break;
      }
      for (int j = 0; j < out_dim_; ++j) {
        y[j] += it->second[j] * value;
        dy[j] += it->second[j] * slope;
      }
    }
    return {y, dy};
  }

  std::size_t visited() const { return coeffs_.size(); }

 private:
  NodePath path_of(const UnitCode& code, int depth) const {
    return {depth == 0 ? 0 : code.bits >> (code.precision - depth), depth};
  }

  BasisProfile profile_;
  int out_dim_;
  std::vector<double> bias_;
  std::map<std::pair<int, std::uint64_t>, std::vector<double>> coeffs_;
};

inline UnitCode random_code(std::mt19937_64& rng, int precision) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  if (u >= 1.0) u = 0.0;
  return make_unit_code(u, precision);
}

// Codes drawn from a small pool of keys so that paths share prefixes and chains split.
inline UnitCode clustered_code(std::mt19937_64& rng, int precision, const std::vector<double>& centres) {
  std::uniform_real_distribution<double> jitter(-1e-3, 1e-3);
  double u = centres[rng() % centres.size()] + jitter(rng) * ((rng() & 1) ? 1.0 : 1e-3);
  u = std::clamp(u, 0.0, std::nextafter(1.0, 0.0));
  return make_unit_code(u, precision);
}

}  // namespace shkan::oracle
