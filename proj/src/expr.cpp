#include "pathflow/expr.hpp"

#include "pathflow/errors.hpp"

#include <cctype>
#include <cmath>
#include <numbers>

namespace pathflow {

namespace {

enum class Op { Number, Variable, Add, Sub, Mul, Div, Neg, Pow, Exp, Log, Sin, Cos, Sqrt };

struct Node {
  Op op;
  double value = 0.0;
  int var = -1;
  int lhs = -1;
  int rhs = -1;
};

}  // namespace

struct Expression::Program {
  std::vector<Node> nodes;
  int root = -1;

  double eval(int i, std::span<const double> v) const {
    const Node& n = nodes[i];
    switch (n.op) {
      case Op::Number: return n.value;
      case Op::Variable: return v[n.var];
      case Op::Add: return eval(n.lhs, v) + eval(n.rhs, v);
      case Op::Sub: return eval(n.lhs, v) - eval(n.rhs, v);
      case Op::Mul: return eval(n.lhs, v) * eval(n.rhs, v);
      case Op::Div: return eval(n.lhs, v) / eval(n.rhs, v);
      case Op::Neg: return -eval(n.lhs, v);
      case Op::Pow: return std::pow(eval(n.lhs, v), eval(n.rhs, v));
      case Op::Exp: return std::exp(eval(n.lhs, v));
      case Op::Log: return std::log(eval(n.lhs, v));
      case Op::Sin: return std::sin(eval(n.lhs, v));
      case Op::Cos: return std::cos(eval(n.lhs, v));
      case Op::Sqrt: return std::sqrt(eval(n.lhs, v));
    }
    return 0.0;
  }
};

namespace {

class Parser {
 public:
  Parser(const std::string& text, const std::vector<std::string>& vars)
      : text_(text), vars_(vars) {}

  Expression::Program run() {
    prog_.root = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return std::move(prog_);
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("expression \"" + text_ + "\": " + msg + " at offset " +
                      std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int push(Node n) {
    prog_.nodes.push_back(n);
    return static_cast<int>(prog_.nodes.size()) - 1;
  }

  int binary(Op op, int l, int r) { return push({op, 0.0, -1, l, r}); }

  int expr() {
    int lhs = term();
    for (;;) {
      if (accept('+')) lhs = binary(Op::Add, lhs, term());
      else if (accept('-')) lhs = binary(Op::Sub, lhs, term());
      else return lhs;
    }
  }

  int term() {
    int lhs = unary();
    for (;;) {
      if (accept('*')) lhs = binary(Op::Mul, lhs, unary());
      else if (accept('/')) lhs = binary(Op::Div, lhs, unary());
      else return lhs;
    }
  }

  int unary() {
    if (accept('-')) return push({Op::Neg, 0.0, -1, unary(), -1});
    if (accept('+')) return unary();
    return power();
  }

  int power() {
    const int base = atom();
    if (accept('^')) return binary(Op::Pow, base, unary());
    return base;
  }

  int atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end");
    const char c = text_[pos_];
    if (accept('(')) {
      const int inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = text_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return push({Op::Number, v});
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      const std::string name = text_.substr(start, pos_ - start);
      if (accept('(')) return call(name);
      if (name == "pi") return push({Op::Number, std::numbers::pi});
      for (std::size_t i = 0; i < vars_.size(); ++i)
        if (vars_[i] == name) return push({Op::Variable, 0.0, static_cast<int>(i)});
      fail("unknown variable '" + name + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  int call(const std::string& name) {
    const int a = expr();
    if (name == "pow") {
      if (!accept(',')) fail("pow takes two arguments");
      const int b = expr();
      if (!accept(')')) fail("expected ')'");
      return binary(Op::Pow, a, b);
    }
    if (!accept(')')) fail("expected ')'");
    Op op;
    if (name == "exp") op = Op::Exp;
    else if (name == "log") op = Op::Log;
    else if (name == "sin") op = Op::Sin;
    else if (name == "cos") op = Op::Cos;
    else if (name == "sqrt") op = Op::Sqrt;
    else fail("unknown function '" + name + "'");
    return push({op, 0.0, -1, a, -1});
  }

  const std::string& text_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
  Expression::Program prog_;
};

}  // namespace

Expression Expression::parse(const std::string& text, const std::vector<std::string>& variables) {
  Expression e;
  e.text_ = text;
  e.program_ = std::make_shared<const Program>(Parser(text, variables).run());
  return e;
}

double Expression::eval(std::span<const double> values) const {
  return program_->eval(program_->root, values);
}

std::vector<std::string> flow_variables(int dim) {
  std::vector<std::string> v{"t"};
  for (int i = 1; i <= dim; ++i) v.push_back("x" + std::to_string(i));
  return v;
}

}  // namespace pathflow
