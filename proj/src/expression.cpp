#include "reithom/expression.hpp"

#include "reithom/error.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>

namespace reithom {

struct Expression::Node {
  enum class Kind { constant, variable, neg, add, sub, mul, div, pow, sin, cos, exp };
  Kind kind = Kind::constant;
  double value = 0.0;
  std::size_t slot = 0;
  int exponent = 0;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make(Node::Kind kind, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

class Parser {
public:
  Parser(const std::string& text, const std::vector<std::string>& vars) : text_(text), vars_(vars) {}

  NodePtr parse() {
    auto n = expr();
    skip();
    if (pos_ != text_.size()) {
      fail("unexpected trailing input");
    }
    return n;
  }

private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("expression '" + text_ + "': " + msg + " at offset " + std::to_string(pos_));
  }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    auto lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make(Node::Kind::add, lhs, term());
      } else if (accept('-')) {
        lhs = make(Node::Kind::sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(Node::Kind::mul, lhs, unary());
      } else if (accept('/')) {
        lhs = make(Node::Kind::div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) {
      return make(Node::Kind::neg, unary());
    }
    if (accept('+')) {
      return unary();
    }
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (accept('^')) {
      skip();
      const char* start = text_.c_str() + pos_;
      char* end = nullptr;
      const long e = std::strtol(start, &end, 10);
      if (end == start) {
        fail("exponent must be an integer literal");
      }
      pos_ += static_cast<std::size_t>(end - start);
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::pow;
      n->lhs = base;
      n->exponent = static_cast<int>(e);
      return n;
    }
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= text_.size()) {
      fail("unexpected end of input");
    }
    if (accept('(')) {
      auto n = expr();
      if (!accept(')')) {
        fail("expected ')'");
      }
      return n;
    }
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* start = text_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(start, &end);
      pos_ += static_cast<std::size_t>(end - start);
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::constant;
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      const std::string name = text_.substr(start, pos_ - start);
      if (name == "sin" || name == "cos" || name == "exp") {
        if (!accept('(')) {
          fail("expected '(' after " + name);
        }
        auto arg = expr();
        if (!accept(')')) {
          fail("expected ')'");
        }
        const auto kind = name == "sin"   ? Node::Kind::sin
                          : name == "cos" ? Node::Kind::cos
                                          : Node::Kind::exp;
        return make(kind, arg);
      }
      if (name == "pi") {
        auto n = std::make_shared<Node>();
        n->value = std::numbers::pi;
        return n;
      }
      for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (vars_[i] == name) {
          auto n = std::make_shared<Node>();
          n->kind = Node::Kind::variable;
          n->slot = i;
          return n;
        }
      }
      fail("unknown identifier '" + name + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  const std::string& text_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

double evaluate(const Node& n, std::span<const double> x) {
  switch (n.kind) {
  case Node::Kind::constant: return n.value;
  case Node::Kind::variable: return x[n.slot];
  case Node::Kind::neg: return -evaluate(*n.lhs, x);
  case Node::Kind::add: return evaluate(*n.lhs, x) + evaluate(*n.rhs, x);
  case Node::Kind::sub: return evaluate(*n.lhs, x) - evaluate(*n.rhs, x);
  case Node::Kind::mul: return evaluate(*n.lhs, x) * evaluate(*n.rhs, x);
  case Node::Kind::div: return evaluate(*n.lhs, x) / evaluate(*n.rhs, x);
  case Node::Kind::pow: return std::pow(evaluate(*n.lhs, x), n.exponent);
  case Node::Kind::sin: return std::sin(evaluate(*n.lhs, x));
  case Node::Kind::cos: return std::cos(evaluate(*n.lhs, x));
  case Node::Kind::exp: return std::exp(evaluate(*n.lhs, x));
  }
  return 0.0;
}

} // namespace

Expression::Expression(const std::string& source, std::vector<std::string> variables)
    : source_(source), variables_(std::move(variables)) {
  root_ = Parser(source_, variables_).parse();
}

double Expression::operator()(std::span<const double> values) const {
  if (values.size() != variables_.size()) {
    throw ContractError("expression '" + source_ + "' expects " +
                        std::to_string(variables_.size()) + " variables");
  }
  return evaluate(*root_, values);
}

} // namespace reithom
