#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace reithom {

/// A compiled scalar expression over named variables.
///
/// Grammar: numbers, variables, `pi`, unary minus, `+ - * /`, `^` with an
/// integer literal exponent, parentheses and the functions sin, cos, exp.
/// Unknown identifiers are rejected at parse time with a ConfigError.
class Expression {
public:
  Expression(const std::string& source, std::vector<std::string> variables);

  /// `values` must follow the order of the variable list given at construction.
  double operator()(std::span<const double> values) const;

  const std::string& source() const noexcept { return source_; }

  struct Node;

private:
  std::string source_;
  std::vector<std::string> variables_;
  std::shared_ptr<const Node> root_;
};

} // namespace reithom
