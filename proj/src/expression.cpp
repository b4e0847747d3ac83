#include "thintube/expression.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <variant>

namespace thintube {

namespace {

enum class Func { Sin, Cos, Exp, Sqrt, Tanh, Abs };

constexpr std::array<std::pair<std::string_view, Func>, 6> kFunctions{{
    {"sin", Func::Sin},
    {"cos", Func::Cos},
    {"exp", Func::Exp},
    {"sqrt", Func::Sqrt},
    {"tanh", Func::Tanh},
    {"abs", Func::Abs},
}};

}  // namespace

struct Expression::Node {
  struct Number {
    double value;
  };
  struct Variable {};
  struct Negate {
    std::shared_ptr<const Node> arg;
  };
  struct Binary {
    char op;
    std::shared_ptr<const Node> lhs, rhs;
  };
  struct Call {
    Func func;
    std::shared_ptr<const Node> arg;
  };
  std::variant<Number, Variable, Negate, Binary, Call> data;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    auto node = expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return node;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ExpressionError("expression error at offset " + std::to_string(pos_) + ": " + msg, pos_);
  }

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

  static NodePtr make(Expression::Node node) { return std::make_shared<const Expression::Node>(std::move(node)); }

  NodePtr expr() {
    auto lhs = term();
    while (true) {
      if (accept('+'))
        lhs = make({Expression::Node::Binary{'+', lhs, term()}});
      else if (accept('-'))
        lhs = make({Expression::Node::Binary{'-', lhs, term()}});
      else
        return lhs;
    }
  }

  NodePtr term() {
    auto lhs = unary();
    while (true) {
      if (accept('*'))
        lhs = make({Expression::Node::Binary{'*', lhs, unary()}});
      else if (accept('/'))
        lhs = make({Expression::Node::Binary{'/', lhs, unary()}});
      else
        return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make({Expression::Node::Negate{unary()}});
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (accept('^')) return make({Expression::Node::Binary{'^', base, unary()}});
    return base;
  }

  NodePtr primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
      const auto name = text_.substr(start, pos_ - start);
      if (name == "s") return make({Expression::Node::Variable{}});
      for (const auto& [fname, func] : kFunctions) {
        if (name == fname) {
          if (!accept('(')) fail("expected '(' after function " + std::string(name));
          auto arg = expr();
          if (!accept(')')) fail("expected ')'");
          return make({Expression::Node::Call{func, arg}});
        }
      }
      pos_ = start;
      fail("unknown identifier '" + std::string(name) + "'");
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
      if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
        pos_ = look;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double value = 0.0;
    const auto* first = text_.data() + start;
    const auto* last = text_.data() + pos_;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
      pos_ = start;
      fail("malformed number");
    }
    return make({Expression::Node::Number{value}});
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

double eval(const Expression::Node& node, double s) {
  return std::visit(
      [s](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Expression::Node::Number>) {
          return n.value;
        } else if constexpr (std::is_same_v<T, Expression::Node::Variable>) {
          return s;
        } else if constexpr (std::is_same_v<T, Expression::Node::Negate>) {
          return -eval(*n.arg, s);
        } else if constexpr (std::is_same_v<T, Expression::Node::Binary>) {
          const double a = eval(*n.lhs, s), b = eval(*n.rhs, s);
          switch (n.op) {
            case '+': return a + b;
            case '-': return a - b;
            case '*': return a * b;
            case '/': return a / b;
            default: return std::pow(a, b);
          }
        } else {
          const double a = eval(*n.arg, s);
          switch (n.func) {
            case Func::Sin: return std::sin(a);
            case Func::Cos: return std::cos(a);
            case Func::Exp: return std::exp(a);
            case Func::Sqrt: return std::sqrt(a);
            case Func::Tanh: return std::tanh(a);
            case Func::Abs: return std::abs(a);
          }
          return 0.0;
        }
      },
      node.data);
}

}  // namespace

Expression::Expression(std::shared_ptr<const Node> root, std::string text)
    : root_(std::move(root)), text_(std::move(text)) {}

Expression Expression::parse(std::string_view text) {
  Parser parser(text);
  return Expression(parser.parse(), std::string(text));
}

double Expression::operator()(double s) const { return eval(*root_, s); }

}  // namespace thintube
