#include "stefan/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "stefan/error.hpp"

namespace stefan::expr {

namespace {

NodePtr make(auto&& alternative) {
    return std::make_shared<const Node>(Node{std::forward<decltype(alternative)>(alternative)});
}

struct FuncInfo {
    std::string_view name;
    Func func;
    int arity;
};

constexpr FuncInfo kFunctions[] = {
    {"sin", Func::Sin, 1},   {"cos", Func::Cos, 1},   {"exp", Func::Exp, 1},
    {"log", Func::Log, 1},   {"sqrt", Func::Sqrt, 1}, {"abs", Func::Abs, 1},
    {"min", Func::Min, 2},   {"max", Func::Max, 2},
};

const FuncInfo& info(Func f) {
    for (const auto& fi : kFunctions)
        if (fi.func == f) return fi;
    throw std::logic_error("unknown function tag");
}

// Pratt parser over the raw byte string; positions are byte offsets.
class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    NodePtr parse_all() {
        NodePtr e = parse_expr(0);
        skip_ws();
        if (pos_ != src_.size()) fail({"operator", "end of input"});
        return e;
    }

private:
    static constexpr int kUnaryBp = 30;

    struct Infix {
        BinOp op;
        int left_bp, right_bp;
    };

    std::string_view src_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    [[noreturn]] void fail(std::vector<std::string> expected, std::size_t at) const {
        std::string msg = "syntax error at offset " + std::to_string(at) + ": expected ";
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (i) msg += (i + 1 == expected.size()) ? " or " : ", ";
            msg += expected[i];
        }
        if (at < src_.size())
            msg += ", found '" + std::string(1, src_[at]) + "'";
        else
            msg += ", found end of input";
        throw SyntaxError(at, std::move(expected), msg);
    }
    [[noreturn]] void fail(std::vector<std::string> expected) const { fail(std::move(expected), pos_); }

    bool peek_infix(Infix& out) {
        skip_ws();
        if (pos_ >= src_.size()) return false;
        switch (src_[pos_]) {
            case '+': out = {BinOp::Add, 10, 11}; return true;
            case '-': out = {BinOp::Sub, 10, 11}; return true;
            case '*': out = {BinOp::Mul, 20, 21}; return true;
            case '/': out = {BinOp::Div, 20, 21}; return true;
            case '^': out = {BinOp::Pow, 41, 40}; return true;
            default: return false;
        }
    }

    NodePtr parse_expr(int min_bp) {
        NodePtr lhs = parse_prefix();
        Infix op{};
        while (peek_infix(op)) {
            if (op.left_bp < min_bp) break;
            ++pos_;
            NodePtr rhs = parse_expr(op.right_bp);
            lhs = make(Binary{op.op, std::move(lhs), std::move(rhs)});
        }
        return lhs;
    }

    NodePtr parse_prefix() {
        skip_ws();
        if (pos_ >= src_.size()) fail({"number", "identifier", "'('", "'-'"});
        const char c = src_[pos_];
        if (c == '-') {
            ++pos_;
            return make(Negate{parse_expr(kUnaryBp)});
        }
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_expr(0);
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        fail({"number", "identifier", "'('", "'-'"});
    }

    void expect(char c) {
        skip_ws();
        if (pos_ >= src_.size() || src_[pos_] != c) fail({std::string("'") + c + "'"});
        ++pos_;
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
            ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
            if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
                pos_ = look;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            }
        }
        double value = 0.0;
        const auto* first = src_.data() + start;
        const auto* last = src_.data() + pos_;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last) fail({"number"}, start);
        return make(Number{value});
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string_view name = src_.substr(start, pos_ - start);
        if (name == "x") return make(Variable{Var::X});
        if (name == "t") return make(Variable{Var::T});
        if (name == "pi") return make(Number{std::numbers::pi});
        for (const auto& fi : kFunctions) {
            if (fi.name != name) continue;
            expect('(');
            NodePtr a0 = parse_expr(0);
            NodePtr a1;
            if (fi.arity == 2) {
                expect(',');
                a1 = parse_expr(0);
            }
            expect(')');
            return make(Call{fi.func, std::move(a0), std::move(a1)});
        }
        std::vector<std::string> expected{"x", "t", "pi"};
        for (const auto& fi : kFunctions) expected.emplace_back(fi.name);
        std::string msg = "unknown identifier '" + std::string(name) + "' at offset " +
                          std::to_string(start);
        throw SyntaxError(start, std::move(expected), msg);
    }
};

double checked(double value, const char* fn, double arg, const EvalOptions& opts) {
    if (opts.strict_math && !std::isfinite(value))
        throw DomainError(fn, arg, std::string("domain error in ") + fn + " at argument " +
                                       std::to_string(arg));
    return value;
}

double eval_node(const Node& node, double x, double t, const EvalOptions& opts) {
    return std::visit(
        [&](const auto& n) -> double {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Number>) {
                return n.value;
            } else if constexpr (std::is_same_v<N, Variable>) {
                return n.var == Var::X ? x : t;
            } else if constexpr (std::is_same_v<N, Negate>) {
                return -eval_node(*n.operand, x, t, opts);
            } else if constexpr (std::is_same_v<N, Binary>) {
                const double a = eval_node(*n.lhs, x, t, opts);
                const double b = eval_node(*n.rhs, x, t, opts);
                switch (n.op) {
                    case BinOp::Add: return a + b;
                    case BinOp::Sub: return a - b;
                    case BinOp::Mul: return a * b;
                    case BinOp::Div:
                        if (opts.strict_math && b == 0.0)
                            throw DomainError("/", b, "division by zero");
                        return a / b;
                    case BinOp::Pow: return checked(std::pow(a, b), "^", a, opts);
                }
                return 0.0;
            } else {
                const double a = eval_node(*n.arg0, x, t, opts);
                switch (n.func) {
                    case Func::Sin: return std::sin(a);
                    case Func::Cos: return std::cos(a);
                    case Func::Exp: return checked(std::exp(a), "exp", a, opts);
                    case Func::Log:
                        if (opts.strict_math && a <= 0.0)
                            throw DomainError("log", a, "log of nonpositive argument " + std::to_string(a));
                        return std::log(a);
                    case Func::Sqrt:
                        if (opts.strict_math && a < 0.0)
                            throw DomainError("sqrt", a, "sqrt of negative argument " + std::to_string(a));
                        return std::sqrt(a);
                    case Func::Abs: return std::abs(a);
                    case Func::Min: return std::min(a, eval_node(*n.arg1, x, t, opts));
                    case Func::Max: return std::max(a, eval_node(*n.arg1, x, t, opts));
                }
                return 0.0;
            }
        },
        node.data);
}

bool depends_on(const Node& node, Var var) {
    return std::visit(
        [&](const auto& n) -> bool {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Number>) return false;
            else if constexpr (std::is_same_v<N, Variable>) return n.var == var;
            else if constexpr (std::is_same_v<N, Negate>) return depends_on(*n.operand, var);
            else if constexpr (std::is_same_v<N, Binary>)
                return depends_on(*n.lhs, var) || depends_on(*n.rhs, var);
            else
                return depends_on(*n.arg0, var) || (n.arg1 && depends_on(*n.arg1, var));
        },
        node.data);
}

void render(const Node& node, std::string& out) {
    std::visit(
        [&](const auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Number>) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.17g", n.value);
                out += buf;
            } else if constexpr (std::is_same_v<N, Variable>) {
                out += n.var == Var::X ? 'x' : 't';
            } else if constexpr (std::is_same_v<N, Negate>) {
                out += "(-";
                render(*n.operand, out);
                out += ')';
            } else if constexpr (std::is_same_v<N, Binary>) {
                static constexpr char kOps[] = {'+', '-', '*', '/', '^'};
                out += '(';
                render(*n.lhs, out);
                out += ' ';
                out += kOps[static_cast<int>(n.op)];
                out += ' ';
                render(*n.rhs, out);
                out += ')';
            } else {
                out += info(n.func).name;
                out += '(';
                render(*n.arg0, out);
                if (n.arg1) {
                    out += ", ";
                    render(*n.arg1, out);
                }
                out += ')';
            }
        },
        node.data);
}

bool equal(const Node& a, const Node& b) {
    if (a.data.index() != b.data.index()) return false;
    return std::visit(
        [&](const auto& na) -> bool {
            using N = std::decay_t<decltype(na)>;
            const auto& nb = std::get<N>(b.data);
            if constexpr (std::is_same_v<N, Number>) return na.value == nb.value;
            else if constexpr (std::is_same_v<N, Variable>) return na.var == nb.var;
            else if constexpr (std::is_same_v<N, Negate>) return equal(*na.operand, *nb.operand);
            else if constexpr (std::is_same_v<N, Binary>)
                return na.op == nb.op && equal(*na.lhs, *nb.lhs) && equal(*na.rhs, *nb.rhs);
            else {
                if (na.func != nb.func || !equal(*na.arg0, *nb.arg0)) return false;
                if (!na.arg1 || !nb.arg1) return !na.arg1 && !nb.arg1;
                return equal(*na.arg1, *nb.arg1);
            }
        },
        a.data);
}

}  // namespace

Expr::Expr() : root_(make(Number{0.0})) {}

double Expr::eval(double x, double t, const EvalOptions& opts) const {
    return eval_node(*root_, x, t, opts);
}

bool Expr::depends_on_x() const { return depends_on(*root_, Var::X); }
bool Expr::depends_on_t() const { return depends_on(*root_, Var::T); }

std::string Expr::to_string() const {
    std::string out;
    render(*root_, out);
    return out;
}

bool operator==(const Expr& a, const Expr& b) { return equal(*a.root_, *b.root_); }

Expr parse(std::string_view source) { return Expr(Parser(source).parse_all()); }

}  // namespace stefan::expr
