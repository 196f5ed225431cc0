#include "fvmatch/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace fvmatch {

enum class Op { Constant, Variable, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Abs };

struct SignalExpr::Node {
  Op op;
  double value = 0.0;  // Constant
  int var = 0;         // Variable: 0..4 for u v x y z
  std::unique_ptr<Node> lhs, rhs;
};

namespace {

using Node = SignalExpr::Node;
using NodePtr = std::unique_ptr<Node>;

NodePtr make(Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
  auto n = std::make_unique<Node>();
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  NodePtr parse() {
    NodePtr e = expression();
    skip_space();
    if (pos_ != text_.size())
      throw ParseError("unexpected input at position " + std::to_string(pos_ + 1) + ": '" +
                       text_.substr(pos_) + "'");
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  NodePtr expression() {
    NodePtr lhs = term();
    for (;;) {
      if (consume('+'))
        lhs = make(Op::Add, std::move(lhs), term());
      else if (consume('-'))
        lhs = make(Op::Sub, std::move(lhs), term());
      else
        return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (consume('*'))
        lhs = make(Op::Mul, std::move(lhs), unary());
      else if (consume('/'))
        lhs = make(Op::Div, std::move(lhs), unary());
      else
        return lhs;
    }
  }

  NodePtr unary() {
    if (consume('-')) return make(Op::Neg, unary());
    if (consume('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (consume('^')) return make(Op::Pow, std::move(base), unary());  // right-associative
    return base;
  }

  NodePtr atom() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expression();
      if (!consume(')'))
        throw ParseError("missing ')' at position " + std::to_string(pos_ + 1));
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    throw ParseError(std::string("unexpected character '") + c + "' at position " +
                     std::to_string(pos_ + 1));
  }

  NodePtr number() {
    const char* start = text_.c_str() + pos_;
    char* end = nullptr;
    const double value = std::strtod(start, &end);
    if (end == start) throw ParseError("malformed number at position " + std::to_string(pos_ + 1));
    pos_ += static_cast<std::size_t>(end - start);
    auto n = make(Op::Constant);
    n->value = value;
    return n;
  }

  NodePtr identifier() {
    std::size_t begin = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string name = text_.substr(begin, pos_ - begin);
    static const std::string vars = "uvxyz";
    if (name.size() == 1 && vars.find(name[0]) != std::string::npos) {
      auto n = make(Op::Variable);
      n->var = static_cast<int>(vars.find(name[0]));
      return n;
    }
    Op op;
    if (name == "sin")
      op = Op::Sin;
    else if (name == "cos")
      op = Op::Cos;
    else if (name == "exp")
      op = Op::Exp;
    else if (name == "abs")
      op = Op::Abs;
    else
      throw ParseError("unknown identifier '" + name + "' at position " + std::to_string(begin + 1));
    if (!consume('(')) throw ParseError("expected '(' after '" + name + "'");
    NodePtr arg = expression();
    if (!consume(')')) throw ParseError("missing ')' after argument of '" + name + "'");
    return make(op, std::move(arg));
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

double eval_node(const Node& n, const double* vars) {
  switch (n.op) {
    case Op::Constant: return n.value;
    case Op::Variable: return vars[n.var];
    case Op::Add: return eval_node(*n.lhs, vars) + eval_node(*n.rhs, vars);
    case Op::Sub: return eval_node(*n.lhs, vars) - eval_node(*n.rhs, vars);
    case Op::Mul: return eval_node(*n.lhs, vars) * eval_node(*n.rhs, vars);
    case Op::Div: return eval_node(*n.lhs, vars) / eval_node(*n.rhs, vars);
    case Op::Pow: return std::pow(eval_node(*n.lhs, vars), eval_node(*n.rhs, vars));
    case Op::Neg: return -eval_node(*n.lhs, vars);
    case Op::Sin: return std::sin(eval_node(*n.lhs, vars));
    case Op::Cos: return std::cos(eval_node(*n.lhs, vars));
    case Op::Exp: return std::exp(eval_node(*n.lhs, vars));
    case Op::Abs: return std::abs(eval_node(*n.lhs, vars));
  }
  return 0.0;
}

}  // namespace

SignalExpr::SignalExpr(const std::string& text) : text_(text) {
  Parser parser(text);
  root_ = parser.parse();
}

SignalExpr::~SignalExpr() = default;
SignalExpr::SignalExpr(SignalExpr&&) noexcept = default;
SignalExpr& SignalExpr::operator=(SignalExpr&&) noexcept = default;

double SignalExpr::eval(double u, double v, double x, double y, double z) const {
  const double vars[5] = {u, v, x, y, z};
  return eval_node(*root_, vars);
}

}  // namespace fvmatch
