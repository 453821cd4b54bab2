#include "shkan/codec.hpp"

#include <bit>
#include <cfloat>
#include <cmath>
#include <string>

#include "shkan/error.hpp"

namespace shkan {
namespace {

// Largest doubles strictly below 1/2 and 1.
const double kBelowHalf = std::nextafter(0.5, 0.0);
const double kBelowOne = std::nextafter(1.0, 0.0);

// Offset-binary position of a non-negative magnitude inside [0, 1/2):
// 2^-12 (fexp + 1022 + 2 fsig) for normals, linear in the lowest cells for subnormals.
double positive_unit(double magnitude) {
  if (magnitude == 0.0) return 0.0;
  if (std::isinf(magnitude)) return kBelowHalf;
  if (magnitude < DBL_MIN) return std::ldexp(magnitude, 1011);
  int fexp = 0;
  const double fsig = std::frexp(magnitude, &fexp);
  const double u = std::ldexp(static_cast<double>(fexp + 1022) + 2.0 * fsig, -12);
  return u < kBelowHalf ? u : kBelowHalf;
}

double float_unit(double x) {
  if (x >= 0.0) return positive_unit(x);
  const double u = 0.5 + positive_unit(-x);
  return u < kBelowOne ? u : kBelowOne;
}

double fixed_unit(double x, int bits) {
  const double top = 1.0 - std::ldexp(1.0, -bits);
  if (x <= 0.0) return 0.0;
  return x < top ? x : top;
}

}  // namespace

std::string_view to_string(CodecKind kind) { return kind == CodecKind::kFixed ? "fixed" : "float754"; }

CodecKind codec_kind_from_string(std::string_view name) {
  if (name == "float754") return CodecKind::kFloat754;
  if (name == "fixed") return CodecKind::kFixed;
  fail(ErrorKind::kConfig, "unknown codec kind '" + std::string(name) + "'");
}

void CodecConfig::validate() const {
  if (kind == CodecKind::kFixed) {
    if (fixed_bits < 1 || fixed_bits > 64) fail(ErrorKind::kConfig, "fixed codec needs 1..64 bits");
    return;
  }
  if (sign_bits != 1) fail(ErrorKind::kConfig, "float754 codec uses exactly one sign bit");
  // The unit map is the binary64 layout; narrower exponent fields are not modelled.
  if (exponent_bits != 11) fail(ErrorKind::kConfig, "float754 codec uses the 11-bit binary64 exponent");
  if (significand_bits < 0 || significand_bits > 52)
    fail(ErrorKind::kConfig, "float754 significand bits must lie in 0..52");
}

UnitCode make_unit_code(double u, int precision) {
  if (!(u >= 0.0 && u < 1.0)) fail(ErrorKind::kInvalidArgument, "unit code outside [0,1)");
  if (precision < 1 || precision > 64) fail(ErrorKind::kInvalidArgument, "unit code precision must be 1..64");
  return {u, static_cast<std::uint64_t>(std::ldexp(u, precision)), precision};
}

UnitCode encode(double x, const CodecConfig& cfg) {
  if (!std::isfinite(x)) fail(ErrorKind::kNumeric, "non-finite input");
  return encode_lenient(x, cfg);
}

UnitCode encode_lenient(double x, const CodecConfig& cfg) {
  if (std::isnan(x)) fail(ErrorKind::kNumeric, "non-finite input");
  const int p = cfg.precision();
  if (cfg.kind == CodecKind::kFixed) return make_unit_code(fixed_unit(x, p), p);
  return make_unit_code(float_unit(x), p);
}

double encode_derivative(double x, const CodecConfig& cfg) {
  if (!std::isfinite(x)) fail(ErrorKind::kNumeric, "non-finite input");
  if (cfg.kind == CodecKind::kFixed) return (x >= 0.0 && x < 1.0) ? 1.0 : 0.0;
  const double magnitude = std::fabs(x);
  double slope = 0.0;
  if (magnitude < DBL_MIN) {
    slope = std::ldexp(1.0, 1011);
  } else {
    int fexp = 0;
    std::frexp(magnitude, &fexp);
    slope = std::ldexp(1.0, -fexp - 11);
  }
  return std::signbit(x) && x != 0.0 ? -slope : slope;
}

std::uint64_t raw_index(double x) {
  if (!std::isfinite(x)) fail(ErrorKind::kNumeric, "non-finite input");
  if (x == 0.0) return 0;
  return std::bit_cast<std::uint64_t>(x);
}

BasisProfile default_profile(const CodecConfig& cfg) {
  cfg.validate();
  if (cfg.kind == CodecKind::kFixed) return BasisProfile::uniform(BasisKind::kSlash, cfg.fixed_bits, 0.5);
  std::vector<ProfileRegion> regions{{BasisKind::kHaar, cfg.sign_bits + cfg.exponent_bits, 1.0}};
  if (cfg.significand_bits > 0) regions.push_back({BasisKind::kSlash, cfg.significand_bits, 0.5});
  return BasisProfile(std::move(regions));
}

}  // namespace shkan
