#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "shkan/basis.hpp"
#include "shkan/codec.hpp"
#include "shkan/patricia_tree.hpp"

namespace shkan {

struct AdamHyper {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Uncompressed binary tree of coefficients stored as one array per depth.
/// Same semantics as PatriciaTree; used as its reference and for Adam.
class DenseTree {
 public:
  static constexpr int kMaxPrecision = 24;

  DenseTree(BasisProfile profile, int out_dim);

  const BasisProfile& profile() const { return profile_; }
  int precision() const { return precision_; }
  int out_dim() const { return out_dim_; }

  PredictResult predict(const UnitCode& code) const;
  void predict_into(const UnitCode& code, std::span<double> y, std::span<double> dy_du) const;
  void update(const UnitCode& code, std::span<const double> delta, double rate);

  /// One Adam step on the bias and the path bases, with the Haar-sign value
  /// standing in for the basis gradient of the squared-error loss. `step` >= 1.
  void adam_step(const UnitCode& code, std::span<const double> delta, const AdamHyper& hyper, std::uint64_t step);

  double coefficient(const NodePath& b, int output) const;
  std::span<const double> bias() const { return bias_; }

 private:
  struct AdamState {
    std::vector<std::vector<double>> m, v;
    std::vector<double> bias_m, bias_v;
  };

  void check_code(const UnitCode& code) const;
  std::size_t slot(int depth, std::uint64_t key_bits) const {
    return static_cast<std::size_t>(key_bits >> (precision_ - depth)) * static_cast<std::size_t>(out_dim_);
  }

  BasisProfile profile_;
  int precision_ = 0;
  int out_dim_ = 1;
  std::vector<double> bias_;
  std::vector<std::vector<double>> levels_;
  std::optional<AdamState> adam_;  // allocated by the first adam_step
};

}  // namespace shkan
