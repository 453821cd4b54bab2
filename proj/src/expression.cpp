#include "shkan/expression.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

namespace shkan {

namespace {

using Op = Expression::Op;
using Node = Expression::Node;

struct FunctionEntry {
  std::string_view name;
  Op op;
};

constexpr FunctionEntry kFunctions[] = {
    {"exp", Op::kExp}, {"log", Op::kLog},   {"sin", Op::kSin},           {"cos", Op::kCos},
    {"tan", Op::kTan}, {"sqrt", Op::kSqrt}, {"besselj0", Op::kBesselJ0},
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Node parse_all() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("empty expression", 1);
    Node n = expr();
    skip_space();
    if (pos_ < text_.size()) throw ParseError("unexpected '" + std::string(1, text_[pos_]) + "'", pos_ + 1);
    return n;
  }

  int arity() const { return arity_; }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  [[noreturn]] void expected(const std::string& what) {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("expected " + what + " but reached end of input", pos_ + 1);
    throw ParseError("expected " + what + " but found '" + std::string(1, text_[pos_]) + "'", pos_ + 1);
  }

  static Node binary(Op op, Node a, Node b) {
    Node n;
    n.op = op;
    n.args.push_back(std::move(a));
    n.args.push_back(std::move(b));
    return n;
  }

  Node expr() {
    Node left = term();
    while (true) {
      if (accept('+')) {
        left = binary(Op::kAdd, std::move(left), term());
      } else if (accept('-')) {
        left = binary(Op::kSub, std::move(left), term());
      } else {
        return left;
      }
    }
  }

  Node term() {
    Node left = unary();
    while (true) {
      if (accept('*')) {
        left = binary(Op::kMul, std::move(left), unary());
      } else if (accept('/')) {
        left = binary(Op::kDiv, std::move(left), unary());
      } else {
        return left;
      }
    }
  }

  Node unary() {
    if (accept('-')) {
      Node n;
      n.op = Op::kNeg;
      n.args.push_back(unary());
      return n;
    }
    return power();
  }

  Node power() {
    Node base = atom();
    if (accept('^')) return binary(Op::kPow, std::move(base), unary());
    return base;
  }

  Node atom() {
    skip_space();
    if (pos_ >= text_.size()) expected("a value");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    if (accept('(')) {
      Node inner = expr();
      if (!accept(')')) expected("')'");
      return inner;
    }
    expected("a value");
  }

  Node number() {
    const std::size_t start = pos_;
    const std::string rest(text_.substr(pos_));
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) throw ParseError("malformed number", start + 1);
    if (errno == ERANGE && std::isinf(v)) throw ParseError("number out of range", start + 1);
    pos_ += static_cast<std::size_t>(end - rest.c_str());
    Node n;
    n.value = v;
    return n;
  }

  Node identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);
    if (name == "pi") {
      Node n;
      n.value = std::numbers::pi;
      return n;
    }
    if (name.size() >= 2 && name[0] == 'x' && name[1] != '0' &&
        name.find_first_not_of("0123456789", 1) == std::string_view::npos && name.size() <= 6) {
      Node n;
      n.op = Op::kVar;
      n.var = std::atoi(std::string(name.substr(1)).c_str()) - 1;
      arity_ = std::max(arity_, n.var + 1);
      return n;
    }
    for (const auto& f : kFunctions) {
      if (f.name != name) continue;
      if (!accept('(')) expected("'(' after " + std::string(name));
      Node n;
      n.op = f.op;
      n.args.push_back(expr());
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == ',')
        throw ParseError(std::string(name) + " takes exactly one argument", pos_ + 1);
      if (!accept(')')) expected("')'");
      return n;
    }
    throw ParseError("unknown identifier '" + std::string(name) + "'", start + 1);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int arity_ = 0;
};

double eval(const Node& n, std::span<const double> x) {
  switch (n.op) {
    case Op::kConst:
      return n.value;
    case Op::kVar:
      return x[static_cast<std::size_t>(n.var)];
    case Op::kNeg:
      return -eval(n.args[0], x);
    case Op::kAdd:
      return eval(n.args[0], x) + eval(n.args[1], x);
    case Op::kSub:
      return eval(n.args[0], x) - eval(n.args[1], x);
    case Op::kMul:
      return eval(n.args[0], x) * eval(n.args[1], x);
    case Op::kDiv:
      return eval(n.args[0], x) / eval(n.args[1], x);
    case Op::kPow:
      return std::pow(eval(n.args[0], x), eval(n.args[1], x));
    case Op::kExp:
      return std::exp(eval(n.args[0], x));
    case Op::kLog:
      return std::log(eval(n.args[0], x));
    case Op::kSin:
      return std::sin(eval(n.args[0], x));
    case Op::kCos:
      return std::cos(eval(n.args[0], x));
    case Op::kTan:
      return std::tan(eval(n.args[0], x));
    case Op::kSqrt:
      return std::sqrt(eval(n.args[0], x));
    case Op::kBesselJ0:
      return std::cyl_bessel_j(0.0, std::fabs(eval(n.args[0], x)));
  }
  return std::nan("");
}

void print(const Node& n, std::string& out) {
  switch (n.op) {
    case Op::kConst: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      out += buf;
      return;
    }
    case Op::kVar:
      out += "x" + std::to_string(n.var + 1);
      return;
    case Op::kNeg:
      out += "(-";
      print(n.args[0], out);
      out += ")";
      return;
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv:
    case Op::kPow: {
      static constexpr char kSymbol[] = {'+', '-', '*', '/', '^'};
      out += "(";
      print(n.args[0], out);
      out += kSymbol[static_cast<int>(n.op) - static_cast<int>(Op::kAdd)];
      print(n.args[1], out);
      out += ")";
      return;
    }
    default:
      out += function_name(n.op);
      out += "(";
      print(n.args[0], out);
      out += ")";
  }
}

}  // namespace

std::string_view function_name(Op op) {
  for (const auto& f : kFunctions)
    if (f.op == op) return f.name;
  return "";
}

Expression Expression::parse(std::string_view text) {
  Parser parser(text);
  Expression e;
  e.root_ = parser.parse_all();
  e.arity_ = parser.arity();
  return e;
}

double Expression::evaluate(std::span<const double> x) const {
  if (x.size() < static_cast<std::size_t>(arity_)) fail(ErrorKind::kInvalidArgument, "too few variables for expression");
  return eval(root_, x);
}

std::string Expression::to_string() const {
  std::string out;
  print(root_, out);
  return out;
}

}  // namespace shkan
