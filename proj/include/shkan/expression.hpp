#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shkan/error.hpp"

namespace shkan {

/// Arithmetic expression over variables x1..xn.
///
/// Grammar (usual precedence, ^ is right-associative and binds tighter than unary minus):
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := '-' unary | power
///   power  := atom ('^' unary)?
///   atom   := number | 'pi' | 'x'<k> | func '(' expr ')' | '(' expr ')'
///   func   := exp | log | sin | cos | tan | sqrt | besselj0
class Expression {
 public:
  enum class Op { kConst, kVar, kNeg, kAdd, kSub, kMul, kDiv, kPow, kExp, kLog, kSin, kCos, kTan, kSqrt, kBesselJ0 };

  struct Node {
    Op op = Op::kConst;
    double value = 0.0;  // kConst
    int var = 0;         // kVar, 0-based
    std::vector<Node> args;

    bool operator==(const Node&) const = default;
  };

  /// Throws ParseError.
  static Expression parse(std::string_view text);

  double evaluate(std::span<const double> x) const;
  /// Highest variable index used plus one.
  int arity() const { return arity_; }
  const Node& root() const { return root_; }

  /// Fully parenthesized text that parses back to an equal tree.
  std::string to_string() const;

  bool operator==(const Expression& other) const { return root_ == other.root_; }

 private:
  Node root_;
  int arity_ = 0;
};

std::string_view function_name(Expression::Op op);

/// Parse failure with a 1-based character position.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error(ErrorKind::kConfig, message + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

}  // namespace shkan
