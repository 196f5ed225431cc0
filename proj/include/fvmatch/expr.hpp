#pragma once

#include <memory>
#include <string>

#include "fvmatch/errors.hpp"

namespace fvmatch {

/// Arithmetic expression over u, v, x, y, z with + - * / ^, sin, cos, exp,
/// abs, and parentheses. Parsed once, evaluated per point.
class SignalExpr {
 public:
  explicit SignalExpr(const std::string& text);  // throws ParseError
  ~SignalExpr();
  SignalExpr(SignalExpr&&) noexcept;
  SignalExpr& operator=(SignalExpr&&) noexcept;

  double eval(double u, double v, double x, double y, double z) const;
  const std::string& text() const { return text_; }

  struct Node;

 private:
  std::unique_ptr<Node> root_;
  std::string text_;
};

}  // namespace fvmatch
