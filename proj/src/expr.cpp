#include "noether/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <system_error>

namespace noether {

Expr::Expr() : Expr(number(0.0)) {}

Expr Expr::number(double value) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{NumberNode{value}}));
}
Expr Expr::variable(std::string name) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{VariableNode{std::move(name)}}));
}
Expr Expr::negate(Expr operand) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{NegateNode{std::move(operand)}}));
}
Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{BinaryNode{op, std::move(lhs), std::move(rhs)}}));
}
Expr Expr::call(Func func, Expr argument) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{CallNode{func, std::move(argument)}}));
}

bool Expr::is_number() const { return std::holds_alternative<NumberNode>(node_->value); }
bool Expr::is_variable() const { return std::holds_alternative<VariableNode>(node_->value); }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = a.node().value;
  const auto& y = b.node().value;
  if (x.index() != y.index()) return false;
  return std::visit(
      [&](const auto& n) -> bool {
        using N = std::decay_t<decltype(n)>;
        const auto& m = std::get<N>(y);
        if constexpr (std::is_same_v<N, NumberNode>) {
          return n.value == m.value;
        } else if constexpr (std::is_same_v<N, VariableNode>) {
          return n.name == m.name;
        } else if constexpr (std::is_same_v<N, NegateNode>) {
          return n.operand == m.operand;
        } else if constexpr (std::is_same_v<N, BinaryNode>) {
          return n.op == m.op && n.lhs == m.lhs && n.rhs == m.rhs;
        } else {
          return n.func == m.func && n.argument == m.argument;
        }
      },
      x);
}

std::string_view function_name(Func f) {
  switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Exp: return "exp";
    case Func::Ln: return "ln";
    case Func::Sqrt: return "sqrt";
    case Func::Abs: return "abs";
  }
  return "?";
}

namespace {

constexpr std::array<Func, 6> kFunctions{Func::Sin, Func::Cos, Func::Exp, Func::Ln, Func::Sqrt, Func::Abs};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

// Recursive descent over:
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' number | '-' unary | power
//
// A minus directly before a literal that is not a power base folds into a
// negative literal, so printed negative numbers parse back to themselves.
//   power   := primary ('^' unary)?
//   primary := number | name | name '(' sum ')' | '(' sum ')'
class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse_all() {
    Expr e = sum();
    skip_space();
    if (pos_ != text_.size()) fail("expected operator or end of input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what, pos_);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])) != 0) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr sum() {
    Expr lhs = product();
    for (;;) {
      if (accept('+')) {
        lhs = Expr::binary(BinaryOp::Add, lhs, product());
      } else if (accept('-')) {
        lhs = Expr::binary(BinaryOp::Sub, lhs, product());
      } else {
        return lhs;
      }
    }
  }

  Expr product() {
    Expr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = Expr::binary(BinaryOp::Mul, lhs, unary());
      } else if (accept('/')) {
        lhs = Expr::binary(BinaryOp::Div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  Expr unary() {
    if (!accept('-')) return power();
    const std::size_t after_minus = pos_;
    skip_space();
    if (pos_ < text_.size() && (is_digit(text_[pos_]) || text_[pos_] == '.')) {
      const Expr literal = number();
      skip_space();
      if (pos_ >= text_.size() || text_[pos_] != '^') {
        return Expr::number(-std::get<NumberNode>(literal.node().value).value);
      }
      pos_ = after_minus;
    }
    return Expr::negate(unary());
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) return Expr::binary(BinaryOp::Pow, base, unary());
    return base;
  }

  Expr primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("expected expression, found end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = sum();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (is_digit(c) || c == '.') return number();
    if (is_ident_start(c)) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
      const std::string name(text_.substr(start, pos_ - start));
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == '(') {
        Func f{};
        bool known = false;
        for (Func candidate : kFunctions) {
          if (function_name(candidate) == name) {
            f = candidate;
            known = true;
          }
        }
        if (!known) {
          pos_ = start;
          fail("unknown function '" + name + "'");
        }
        ++pos_;
        Expr arg = sum();
        if (!accept(')')) fail("expected ')' after function argument");
        return Expr::call(f, arg);
      }
      return Expr::variable(name);
    }
    fail(std::string("expected expression, found '") + c + "'");
  }

  Expr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
      if (look < text_.size() && is_digit(text_[look])) {
        pos_ = look;
        while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
      }
    }
    const std::string_view literal = text_.substr(start, pos_ - start);
    if (literal == ".") {
      pos_ = start;
      fail("malformed number");
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(literal.data(), literal.data() + literal.size(), value);
    if (ec != std::errc() || ptr != literal.data() + literal.size()) {
      pos_ = start;
      fail("malformed number");
    }
    return Expr::number(value);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

// Binding strength used by the printer: sums 1, products 2, unary minus 3,
// powers 4, atoms 5.
int strength(const Expr& e) {
  const auto& v = e.node().value;
  if (const auto* b = std::get_if<BinaryNode>(&v)) {
    switch (b->op) {
      case BinaryOp::Add:
      case BinaryOp::Sub: return 1;
      case BinaryOp::Mul:
      case BinaryOp::Div: return 2;
      case BinaryOp::Pow: return 4;
    }
  }
  if (std::holds_alternative<NegateNode>(v)) return 3;
  // A negative literal prints with a leading minus and binds like one.
  if (const auto* num = std::get_if<NumberNode>(&v); num != nullptr && std::signbit(num->value)) return 3;
  return 5;
}

void print(const Expr& e, std::string& out);

void print_wrapped(const Expr& e, bool wrap, std::string& out) {
  if (wrap) out += '(';
  print(e, out);
  if (wrap) out += ')';
}

void print(const Expr& e, std::string& out) {
  std::visit(
      [&](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, NumberNode>) {
          out += format_number(n.value);
        } else if constexpr (std::is_same_v<N, VariableNode>) {
          out += n.name;
        } else if constexpr (std::is_same_v<N, NegateNode>) {
          out += '-';
          // "-2" would read back as a literal.
          const auto* num = std::get_if<NumberNode>(&n.operand.node().value);
          print_wrapped(n.operand, strength(n.operand) < 3 || (num != nullptr && !std::signbit(num->value)), out);
        } else if constexpr (std::is_same_v<N, BinaryNode>) {
          const int s = strength(e);
          if (n.op == BinaryOp::Pow) {
            print_wrapped(n.lhs, strength(n.lhs) < 5, out);
            out += '^';
            print_wrapped(n.rhs, strength(n.rhs) < 3, out);
            return;
          }
          print_wrapped(n.lhs, strength(n.lhs) < s, out);
          switch (n.op) {
            case BinaryOp::Add: out += " + "; break;
            case BinaryOp::Sub: out += " - "; break;
            case BinaryOp::Mul: out += '*'; break;
            case BinaryOp::Div: out += '/'; break;
            case BinaryOp::Pow: break;
          }
          print_wrapped(n.rhs, strength(n.rhs) <= s, out);
        } else {
          out += function_name(n.func);
          out += '(';
          print(n.argument, out);
          out += ')';
        }
      },
      e.node().value);
}

void collect(const Expr& e, std::set<std::string>& names) {
  std::visit(
      [&](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, VariableNode>) {
          names.insert(n.name);
        } else if constexpr (std::is_same_v<N, NegateNode>) {
          collect(n.operand, names);
        } else if constexpr (std::is_same_v<N, BinaryNode>) {
          collect(n.lhs, names);
          collect(n.rhs, names);
        } else if constexpr (std::is_same_v<N, CallNode>) {
          collect(n.argument, names);
        }
      },
      e.node().value);
}

}  // namespace

Expr parse(std::string_view text) { return Parser(text).parse_all(); }

std::string format_number(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) return std::to_string(value);
  return std::string(buf.data(), ptr);
}

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

std::set<std::string> free_vars(const Expr& e) {
  std::set<std::string> names;
  collect(e, names);
  return names;
}

Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& replacements) {
  return std::visit(
      [&](const auto& n) -> Expr {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, NumberNode>) {
          return e;
        } else if constexpr (std::is_same_v<N, VariableNode>) {
          auto it = replacements.find(n.name);
          return it == replacements.end() ? e : it->second;
        } else if constexpr (std::is_same_v<N, NegateNode>) {
          return Expr::negate(substitute(n.operand, replacements));
        } else if constexpr (std::is_same_v<N, BinaryNode>) {
          return Expr::binary(n.op, substitute(n.lhs, replacements), substitute(n.rhs, replacements));
        } else {
          return Expr::call(n.func, substitute(n.argument, replacements));
        }
      },
      e.node().value);
}

Expr rename(const Expr& e, const std::map<std::string, std::string, std::less<>>& names) {
  std::map<std::string, Expr, std::less<>> replacements;
  for (const auto& [from, to] : names) replacements.emplace(from, Expr::variable(to));
  return substitute(e, replacements);
}

Program Program::compile(const Expr& e, std::span<const std::string> layout) {
  Program p;
  p.emit(e, layout, 1);
  return p;
}

void Program::emit(const Expr& e, std::span<const std::string> layout, std::size_t depth) {
  if (depth > max_depth_) max_depth_ = depth;
  std::visit(
      [&](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, NumberNode>) {
          code_.push_back({Code::Constant, 0, 0, n.value});
        } else if constexpr (std::is_same_v<N, VariableNode>) {
          for (std::size_t i = 0; i < layout.size(); ++i) {
            if (layout[i] == n.name) {
              code_.push_back({Code::Load, 0, static_cast<int>(i), 0.0});
              return;
            }
          }
          throw UnboundVariable(n.name);
        } else if constexpr (std::is_same_v<N, NegateNode>) {
          emit(n.operand, layout, depth);
          code_.push_back({Code::Negate, 0, 0, 0.0});
        } else if constexpr (std::is_same_v<N, BinaryNode>) {
          emit(n.lhs, layout, depth);
          emit(n.rhs, layout, depth + 1);
          code_.push_back({Code::Binary, static_cast<unsigned char>(n.op), 0, 0.0});
        } else {
          emit(n.argument, layout, depth);
          code_.push_back({Code::Call, static_cast<unsigned char>(n.func), 0, 0.0});
        }
      },
      e.node().value);
}

}  // namespace noether
