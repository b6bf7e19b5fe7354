#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "noether/dual.hpp"

namespace noether {

enum class BinaryOp { Add, Sub, Mul, Div, Pow };
enum class Func { Sin, Cos, Exp, Ln, Sqrt, Abs };

/// Syntax error in expression text. `offset()` is the byte offset of the
/// offending token.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : std::runtime_error(message + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// A variable that the evaluation context does not provide.
class UnboundVariable : public std::runtime_error {
 public:
  explicit UnboundVariable(const std::string& name)
      : std::runtime_error("unbound variable '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

struct ExprNode;

/// Immutable expression tree. Copies share structure.
class Expr {
 public:
  Expr();  // the literal 0

  static Expr number(double value);
  static Expr variable(std::string name);
  static Expr negate(Expr operand);
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs);
  static Expr call(Func func, Expr argument);

  const ExprNode& node() const { return *node_; }

  bool is_number() const;
  bool is_variable() const;

  friend bool operator==(const Expr& a, const Expr& b);
  friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

  friend Expr operator+(Expr a, Expr b) { return binary(BinaryOp::Add, std::move(a), std::move(b)); }
  friend Expr operator-(Expr a, Expr b) { return binary(BinaryOp::Sub, std::move(a), std::move(b)); }
  friend Expr operator*(Expr a, Expr b) { return binary(BinaryOp::Mul, std::move(a), std::move(b)); }
  friend Expr operator/(Expr a, Expr b) { return binary(BinaryOp::Div, std::move(a), std::move(b)); }
  friend Expr operator-(Expr a) { return negate(std::move(a)); }

 private:
  explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const ExprNode> node_;
};

struct NumberNode {
  double value;
};
struct VariableNode {
  std::string name;
};
struct NegateNode {
  Expr operand;
};
struct BinaryNode {
  BinaryOp op;
  Expr lhs;
  Expr rhs;
};
struct CallNode {
  Func func;
  Expr argument;
};

struct ExprNode {
  std::variant<NumberNode, VariableNode, NegateNode, BinaryNode, CallNode> value;
};

Expr parse(std::string_view text);

/// Prints with the minimum parentheses needed for `parse` to rebuild the same tree.
std::string to_string(const Expr& e);

std::set<std::string> free_vars(const Expr& e);

/// Replaces variables by expressions; unlisted variables are kept.
Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& replacements);

/// Replaces variable names; unlisted variables are kept.
Expr rename(const Expr& e, const std::map<std::string, std::string, std::less<>>& names);

std::string_view function_name(Func f);

/// Shortest decimal text that reads back to exactly `value`.
std::string format_number(double value);

template <typename T>
using Env = std::map<std::string, T, std::less<>>;

namespace detail {

template <typename T>
T apply_func(Func f, const T& a) {
  switch (f) {
    case Func::Sin: return sin_of(a);
    case Func::Cos: return cos_of(a);
    case Func::Exp: return exp_of(a);
    case Func::Ln: return ln(a);
    case Func::Sqrt: return sqrt_checked(a);
    case Func::Abs: return abs_of(a);
  }
  return a;
}

template <typename T>
T apply_binary(BinaryOp op, const T& a, const T& b) {
  switch (op) {
    case BinaryOp::Add: return a + b;
    case BinaryOp::Sub: return a - b;
    case BinaryOp::Mul: return a * b;
    case BinaryOp::Div: return safe_div(a, b);
    case BinaryOp::Pow: return pow_of(a, b);
  }
  return a;
}

}  // namespace detail

/// Evaluates `e` with variables looked up by name. Works for double and Dual.
template <typename T>
T evaluate(const Expr& e, const Env<T>& env) {
  return std::visit(
      [&](const auto& n) -> T {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, NumberNode>) {
          return T(n.value);
        } else if constexpr (std::is_same_v<N, VariableNode>) {
          auto it = env.find(n.name);
          if (it == env.end()) throw UnboundVariable(n.name);
          return it->second;
        } else if constexpr (std::is_same_v<N, NegateNode>) {
          return -evaluate(n.operand, env);
        } else if constexpr (std::is_same_v<N, BinaryNode>) {
          return detail::apply_binary(n.op, evaluate(n.lhs, env), evaluate(n.rhs, env));
        } else {
          return detail::apply_func(n.func, evaluate(n.argument, env));
        }
      },
      e.node().value);
}

/// An expression compiled against a fixed slot layout: variable names are
/// resolved to positions once, and evaluation runs a postfix program.
class Program {
 public:
  Program() = default;

  /// Throws UnboundVariable if `e` uses a name missing from `layout`.
  static Program compile(const Expr& e, std::span<const std::string> layout);

  template <typename T>
  T operator()(std::span<const T> slots) const;

  std::size_t max_depth() const { return max_depth_; }

 private:
  enum class Code : unsigned char { Constant, Load, Negate, Binary, Call };
  struct Instr {
    Code code;
    unsigned char op;  // BinaryOp or Func
    int slot;
    double value;
  };

  void emit(const Expr& e, std::span<const std::string> layout, std::size_t depth);

  std::vector<Instr> code_;
  std::size_t max_depth_ = 0;
};

template <typename T>
T Program::operator()(std::span<const T> slots) const {
  constexpr std::size_t kInline = 24;
  std::array<T, kInline> small{};
  std::vector<T> large;
  T* stack = small.data();
  if (max_depth_ > kInline) {
    large.resize(max_depth_);
    stack = large.data();
  }
  std::size_t top = 0;
  for (const Instr& in : code_) {
    switch (in.code) {
      case Code::Constant: stack[top++] = T(in.value); break;
      case Code::Load: stack[top++] = slots[static_cast<std::size_t>(in.slot)]; break;
      case Code::Negate: stack[top - 1] = -stack[top - 1]; break;
      case Code::Binary:
        --top;
        stack[top - 1] = detail::apply_binary(static_cast<BinaryOp>(in.op), stack[top - 1], stack[top]);
        break;
      case Code::Call:
        stack[top - 1] = detail::apply_func(static_cast<Func>(in.op), stack[top - 1]);
        break;
    }
  }
  return top == 0 ? T(0.0) : stack[0];
}

}  // namespace noether
