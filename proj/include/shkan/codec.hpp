#pragma once

#include <cstdint>
#include <string_view>

#include "shkan/basis.hpp"

namespace shkan {

enum class CodecKind : std::uint8_t { kFloat754 = 0, kFixed = 1 };

std::string_view to_string(CodecKind kind);
CodecKind codec_kind_from_string(std::string_view name);

struct CodecConfig {
  CodecKind kind = CodecKind::kFloat754;
  int sign_bits = 1;
  int exponent_bits = 11;
  int significand_bits = 16;
  int fixed_bits = 16;

  static CodecConfig float754(int significand_bits = 16) {
    CodecConfig cfg;
    cfg.significand_bits = significand_bits;
    return cfg;
  }
  static CodecConfig fixed(int bits = 16) {
    CodecConfig cfg;
    cfg.kind = CodecKind::kFixed;
    cfg.fixed_bits = bits;
    return cfg;
  }

  /// Key length p in bits.
  int precision() const {
    return kind == CodecKind::kFixed ? fixed_bits : sign_bits + exponent_bits + significand_bits;
  }

  /// Throws Error(kConfig) when the layout is not representable.
  void validate() const;

  bool operator==(const CodecConfig&) const = default;
};

/// A point of [0,1) together with its leading `precision` binary digits.
struct UnitCode {
  double u = 0.0;
  std::uint64_t bits = 0;  // floor(u * 2^precision)
  int precision = 0;
};

/// Truncates u in [0,1) to a p-bit key.
UnitCode make_unit_code(double u, int precision);

/// Maps a finite real to its unit code. NaN and infinities raise
/// Error(kNumeric, "non-finite input").
UnitCode encode(double x, const CodecConfig& cfg);

/// Same as encode, except that infinities are mapped through their IEEE754 bit
/// pattern (the evaluation-time policy). NaN still raises.
UnitCode encode_lenient(double x, const CodecConfig& cfg);

/// du/dx of the continuous part of the codec.
double encode_derivative(double x, const CodecConfig& cfg);

/// Sign-magnitude integer image of a finite double (bit pattern, with -0 folded onto +0).
std::uint64_t raw_index(double x);

/// Haar on the sign and exponent levels (beta 1), Slash-Haar on the significand
/// levels (beta 0.5) for float754; Slash-Haar with beta 0.5 throughout for fixed.
BasisProfile default_profile(const CodecConfig& cfg);

}  // namespace shkan
