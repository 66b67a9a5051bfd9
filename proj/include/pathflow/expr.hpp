#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pathflow {

/// Closed-form scalar expression over a fixed list of variables.
///
/// Grammar (whitespace insensitive):
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := ('+' | '-') unary | power
///   power  := atom ('^' unary)?
///   atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
/// Functions: pow(a, b), exp, log, sin, cos, sqrt. Constant: pi.
/// Variable names are supplied by the caller (flows use t, x1..xd).
class Expression {
 public:
  Expression() = default;
  /// Throws ConfigError on syntax errors or unknown names.
  static Expression parse(const std::string& text, const std::vector<std::string>& variables);

  double eval(std::span<const double> values) const;
  const std::string& text() const { return text_; }
  bool empty() const { return program_ == nullptr; }

  struct Program;

 private:
  std::string text_;
  std::shared_ptr<const Program> program_;
};

/// Names "t", "x1", ..., "xd" in that order.
std::vector<std::string> flow_variables(int dim);

}  // namespace pathflow
