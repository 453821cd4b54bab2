#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace shkan {

enum class BasisKind : std::uint8_t {
  kHaar = 0,      // +A on the first half of the support, -A on the second
  kSlash = 1,     // descending ramp A(1 - 2t) over the support
  kConstant = 2,  // +A over the whole support
};

enum class AmplitudeConvention : std::uint8_t {
  kDiscounted = 0,  // sqrt(1 - beta) * beta^(d'/2), constant dropped when beta == 1
  kUnit = 1,        // beta^(d'/2)
};

// How the loosened (Haar-sign) update is scaled along one root-to-leaf path.
enum class StepNormalization : std::uint8_t {
  kNone = 0,        // w += rate * delta * haar(u)
  kPathEnergy = 1,  // same, divided by 1 + sum_d A(d)^2 so that rate 1 fits the sample exactly
};

std::string_view to_string(BasisKind kind);
BasisKind basis_kind_from_string(std::string_view name);

struct ProfileRegion {
  BasisKind kind = BasisKind::kSlash;
  int depths = 0;
  double beta = 0.5;

  bool operator==(const ProfileRegion&) const = default;
};

/// A dyadic node address b_1..b_d. `bits` holds the digits as an integer with
/// b_1 as the most significant of the `depth` low bits.
struct NodePath {
  std::uint64_t bits = 0;
  int depth = 0;

  static NodePath root() { return {}; }
  static NodePath parse(std::string_view digits);

  NodePath child(int bit) const { return {(bits << 1) | static_cast<std::uint64_t>(bit & 1), depth + 1}; }
  double left() const { return std::ldexp(static_cast<double>(bits), -depth); }
  double width() const { return std::ldexp(1.0, -depth); }

  bool operator==(const NodePath&) const = default;
};

/// Per-depth basis kind and amplitude schedule. Regions are laid out from
/// depth 0 downwards; the discount exponent restarts at each region boundary.
class BasisProfile {
 public:
  BasisProfile() = default;
  explicit BasisProfile(std::vector<ProfileRegion> regions,
                        AmplitudeConvention convention = AmplitudeConvention::kDiscounted,
                        StepNormalization normalization = StepNormalization::kPathEnergy);

  static BasisProfile uniform(BasisKind kind, int depths, double beta);

  const std::vector<ProfileRegion>& regions() const { return regions_; }
  AmplitudeConvention convention() const { return convention_; }
  StepNormalization normalization() const { return normalization_; }

  int depth_count() const { return static_cast<int>(amplitude_.size()); }

  /// Throws Error(kInvalidArgument, "depth overflow") outside [0, depth_count).
  double amplitude(int depth) const;
  BasisKind kind(int depth) const;
  double beta(int depth) const;

  // Unchecked accessors for hot loops.
  double amplitude_at(int depth) const { return amplitude_[static_cast<std::size_t>(depth)]; }
  BasisKind kind_at(int depth) const { return kind_[static_cast<std::size_t>(depth)]; }

  /// 1 (root bias) + sum of A(d)^2 over every depth.
  double path_energy() const { return path_energy_; }
  /// Factor applied to every loosened update.
  double update_gain() const { return update_gain_; }

  bool operator==(const BasisProfile& other) const {
    return regions_ == other.regions_ && convention_ == other.convention_ &&
           normalization_ == other.normalization_;
  }

 private:
  std::vector<ProfileRegion> regions_;
  AmplitudeConvention convention_ = AmplitudeConvention::kDiscounted;
  StepNormalization normalization_ = StepNormalization::kPathEnergy;
  std::vector<double> amplitude_;
  std::vector<BasisKind> kind_;
  std::vector<double> beta_;
  double path_energy_ = 1.0;
  double update_gain_ = 1.0;
};

double amplitude(int depth, const BasisProfile& profile);

/// Position of u inside support(b) in [0,1), or a negative value when u lies outside.
double relative_position(const NodePath& b, double u);

double haar_eval(const NodePath& b, double u, const BasisProfile& profile);
double slash_eval(const NodePath& b, double u, const BasisProfile& profile);
double slash_derivative(const NodePath& b, double u, const BasisProfile& profile);

/// Rebuilds the Haar basis at b from three Slash-Haar bases:
/// 2 S_b - (S_b0 + S_b1) / sqrt(beta(d+1)).
double haar_from_slash(const NodePath& b, double u, const BasisProfile& profile);

/// Classical orthonormal Haar wavelet of level j and shift k on [0,1).
double orthonormal_haar_eval(int j, std::uint64_t k, double x);

namespace basis_detail {

// Value used by the forward pass at relative position t.
inline double forward_value(BasisKind kind, double amp, double t) {
  switch (kind) {
    case BasisKind::kHaar:
      return t < 0.5 ? amp : -amp;
    case BasisKind::kSlash:
      return amp * (1.0 - 2.0 * t);
    case BasisKind::kConstant:
      return amp;
  }
  return 0.0;
}

// d(value)/du at a point inside the support of a depth-`depth` basis.
inline double forward_slope(BasisKind kind, double amp, int depth) {
  return kind == BasisKind::kSlash ? -amp * std::ldexp(2.0, depth) : 0.0;
}

// Haar-sign value used by the loosened update; `bit` is the direction taken below the basis.
inline double update_value(BasisKind kind, double amp, unsigned bit) {
  if (kind == BasisKind::kConstant) return amp;
  return bit == 0 ? amp : -amp;
}

}  // namespace basis_detail

}  // namespace shkan
