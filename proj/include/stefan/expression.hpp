#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <variant>

namespace stefan::expr {

// Closed-form scalar expressions of (x, t).
//
// Grammar (lowest to highest precedence):
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := atom ('^' unary)?            right associative
//   atom    := number | 'x' | 't' | 'pi' | func '(' args ')' | '(' sum ')'
// Functions: sin cos exp log sqrt abs (one argument), min max (two).

enum class Func { Sin, Cos, Exp, Log, Sqrt, Abs, Min, Max };
enum class BinOp { Add, Sub, Mul, Div, Pow };
enum class Var { X, T };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Number { double value; };
struct Variable { Var var; };
struct Negate { NodePtr operand; };
struct Binary { BinOp op; NodePtr lhs, rhs; };
struct Call { Func func; NodePtr arg0, arg1; };

struct Node {
    std::variant<Number, Variable, Negate, Binary, Call> data;
};

struct EvalOptions {
    /// When set, non-finite intermediate results raise DomainError instead of
    /// propagating IEEE infinities / NaNs.
    bool strict_math = true;
};

/// Immutable, cheaply copyable expression handle.
class Expr {
public:
    Expr();  // the literal 0
    explicit Expr(NodePtr root) : root_(std::move(root)) {}

    double eval(double x, double t, const EvalOptions& opts = {}) const;
    double operator()(double x, double t) const { return eval(x, t); }

    bool depends_on_x() const;
    bool depends_on_t() const;
    bool is_constant() const { return !depends_on_x() && !depends_on_t(); }

    /// Fully parenthesized rendering; `parse(e.to_string()) == e`.
    std::string to_string() const;

    const Node& root() const { return *root_; }

    friend bool operator==(const Expr& a, const Expr& b);

private:
    NodePtr root_;
};

/// Throws SyntaxError (byte offset + expected tokens) on malformed input,
/// including unknown identifiers.
Expr parse(std::string_view source);

}  // namespace stefan::expr
