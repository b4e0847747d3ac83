#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

namespace thintube {

/// Syntax or name error in an expression string. `offset()` is the byte
/// offset of the first offending character.
class ExpressionError : public std::runtime_error {
 public:
  ExpressionError(const std::string& what, std::size_t offset)
      : std::runtime_error(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Parsed scalar expression in the single variable `s`.
///
/// Grammar (standard precedence, `^` right-associative and binding tighter
/// than unary minus, so `-s^2 == -(s^2)`):
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := ('-' | '+') unary | power
///   power   := primary ('^' unary)?
///   primary := number | 's' | func '(' expr ')' | '(' expr ')'
///   func    := sin | cos | exp | sqrt | tanh | abs
class Expression {
 public:
  struct Node;

  static Expression parse(std::string_view text);

  double operator()(double s) const;
  const std::string& text() const { return text_; }

 private:
  Expression(std::shared_ptr<const Node> root, std::string text);
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace thintube
