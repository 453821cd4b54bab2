#include "shkan/basis.hpp"

#include <string>

#include "shkan/error.hpp"

namespace shkan {

std::string_view to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::kHaar:
      return "haar";
    case BasisKind::kSlash:
      return "slash";
    case BasisKind::kConstant:
      return "constant";
  }
  return "?";
}

BasisKind basis_kind_from_string(std::string_view name) {
  if (name == "haar") return BasisKind::kHaar;
  if (name == "slash") return BasisKind::kSlash;
  if (name == "constant") return BasisKind::kConstant;
  fail(ErrorKind::kConfig, "unknown basis kind '" + std::string(name) + "'");
}

NodePath NodePath::parse(std::string_view digits) {
  if (digits.size() > 64) fail(ErrorKind::kInvalidArgument, "node path longer than 64 bits");
  NodePath path;
  for (char c : digits) {
    if (c != '0' && c != '1') fail(ErrorKind::kInvalidArgument, "node path must be a string of 0/1");
    path = path.child(c - '0');
  }
  return path;
}

BasisProfile::BasisProfile(std::vector<ProfileRegion> regions, AmplitudeConvention convention,
                           StepNormalization normalization)
    : regions_(std::move(regions)), convention_(convention), normalization_(normalization) {
  if (regions_.empty()) fail(ErrorKind::kConfig, "basis profile needs at least one region");
  for (const auto& region : regions_) {
    if (region.depths < 1) fail(ErrorKind::kConfig, "profile region must cover at least one depth");
    if (!(region.beta > 0.0 && region.beta <= 1.0)) fail(ErrorKind::kConfig, "profile beta must lie in (0, 1]");
    const double c = (convention_ == AmplitudeConvention::kDiscounted && region.beta < 1.0)
                         ? std::sqrt(1.0 - region.beta)
                         : 1.0;
    for (int local = 0; local < region.depths; ++local) {
      amplitude_.push_back(c * std::pow(region.beta, 0.5 * local));
      kind_.push_back(region.kind);
      beta_.push_back(region.beta);
    }
  }
  if (amplitude_.size() > 64) fail(ErrorKind::kConfig, "basis profile deeper than 64 levels");

  path_energy_ = 1.0;
  for (double a : amplitude_) path_energy_ += a * a;
  update_gain_ = normalization_ == StepNormalization::kPathEnergy ? 1.0 / path_energy_ : 1.0;
}

BasisProfile BasisProfile::uniform(BasisKind kind, int depths, double beta) {
  return BasisProfile({ProfileRegion{kind, depths, beta}});
}

double BasisProfile::amplitude(int depth) const {
  if (depth < 0 || depth >= depth_count()) fail(ErrorKind::kInvalidArgument, "depth overflow");
  return amplitude_[static_cast<std::size_t>(depth)];
}

BasisKind BasisProfile::kind(int depth) const {
  if (depth < 0 || depth >= depth_count()) fail(ErrorKind::kInvalidArgument, "depth overflow");
  return kind_[static_cast<std::size_t>(depth)];
}

double BasisProfile::beta(int depth) const {
  if (depth < 0 || depth >= depth_count()) fail(ErrorKind::kInvalidArgument, "depth overflow");
  return beta_[static_cast<std::size_t>(depth)];
}

double amplitude(int depth, const BasisProfile& profile) { return profile.amplitude(depth); }

double relative_position(const NodePath& b, double u) {
  if (!(u >= 0.0 && u < 1.0)) fail(ErrorKind::kInvalidArgument, "unit position outside [0,1)");
  const double scaled = std::ldexp(u, b.depth);  // exact
  const double cell = std::floor(scaled);
  if (cell != static_cast<double>(b.bits)) return -1.0;
  return scaled - cell;
}

double haar_eval(const NodePath& b, double u, const BasisProfile& profile) {
  const double amp = profile.amplitude(b.depth);
  const double t = relative_position(b, u);
  if (t < 0.0) return 0.0;
  return basis_detail::forward_value(BasisKind::kHaar, amp, t);
}

double slash_eval(const NodePath& b, double u, const BasisProfile& profile) {
  const double amp = profile.amplitude(b.depth);
  const double t = relative_position(b, u);
  if (t < 0.0) return 0.0;
  return basis_detail::forward_value(BasisKind::kSlash, amp, t);
}

double slash_derivative(const NodePath& b, double u, const BasisProfile& profile) {
  const double amp = profile.amplitude(b.depth);
  if (relative_position(b, u) < 0.0) return 0.0;
  return basis_detail::forward_slope(BasisKind::kSlash, amp, b.depth);
}

double haar_from_slash(const NodePath& b, double u, const BasisProfile& profile) {
  const double root_beta = std::sqrt(profile.beta(b.depth + 1));
  return 2.0 * slash_eval(b, u, profile) -
         (slash_eval(b.child(0), u, profile) + slash_eval(b.child(1), u, profile)) / root_beta;
}

double orthonormal_haar_eval(int j, std::uint64_t k, double x) {
  if (j < 0 || j > 62) fail(ErrorKind::kInvalidArgument, "haar level out of range");
  if (k >= (std::uint64_t{1} << j)) fail(ErrorKind::kInvalidArgument, "haar shift out of range");
  if (!(x >= 0.0 && x < 1.0)) fail(ErrorKind::kInvalidArgument, "haar argument outside [0,1)");
  const double scale = std::ldexp(1.0, j);
  const double height = std::sqrt(scale);
  const double lo = static_cast<double>(k) / scale;
  const double mid = (static_cast<double>(k) + 0.5) / scale;
  const double hi = (static_cast<double>(k) + 1.0) / scale;
  if (x >= lo && x < mid) return height;
  if (x >= mid && x < hi) return -height;
  return 0.0;
}

}  // namespace shkan
