#pragma once

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pistlab/chart.hpp"
#include "pistlab/errors.hpp"
#include "pistlab/random.hpp"

namespace pistlab {

enum class UnaryOp { neg, sin, cos, exp };
enum class BinaryOp { add, sub, mul, div, pow };

struct Node;

/// Immutable symbolic expression over chart variables.
///
/// An Expr is a shared handle to a tree of nodes: constants, variables,
/// unary functions (neg, sin, cos, exp) and binary operators (add, sub, mul,
/// div, pow). The right operand of pow is always a non-negative integer
/// constant, which keeps differentiation closed-form. Copies are cheap and
/// share structure; nodes are never mutated after construction.
class Expr {
public:
    Expr();  // the constant 0

    static Expr constant(double value);
    static Expr variable(std::string name);
    static Expr unary(UnaryOp op, Expr child);
    /// Throws std::invalid_argument for a pow whose exponent is not a
    /// non-negative integer constant.
    static Expr binary(BinaryOp op, Expr lhs, Expr rhs);

    const Node& node() const noexcept { return *node_; }

    bool is_constant() const noexcept;
    bool is_constant(double value) const noexcept;
    bool is_variable() const noexcept;
    /// Value of a constant node; undefined for other kinds.
    double value() const noexcept;
    /// Name of a variable node; empty for other kinds.
    const std::string& name() const noexcept;

    friend bool operator==(const Expr& a, const Expr& b);

private:
    explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

struct Constant {
    double value;
};
struct Variable {
    std::string name;
};
struct Unary {
    UnaryOp op;
    Expr child;
};
struct Binary {
    BinaryOp op;
    Expr lhs;
    Expr rhs;
};

struct Node {
    std::variant<Constant, Variable, Unary, Binary> data;
};

using VarBinding = std::map<std::string, double, std::less<>>;

// ---------------------------------------------------------------------------
// Construction

inline Expr::Expr() : Expr(Expr::constant(0.0)) {}

inline Expr Expr::constant(double value) {
    return Expr(std::make_shared<const Node>(Node{Constant{value}}));
}

inline Expr Expr::variable(std::string name) {
    return Expr(std::make_shared<const Node>(Node{Variable{std::move(name)}}));
}

inline Expr Expr::unary(UnaryOp op, Expr child) {
    return Expr(std::make_shared<const Node>(Node{Unary{op, std::move(child)}}));
}

inline Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
    if (op == BinaryOp::pow) {
        if (!rhs.is_constant() || rhs.value() < 0 || rhs.value() != std::floor(rhs.value()) ||
            rhs.value() > std::numeric_limits<std::int32_t>::max())
            throw std::invalid_argument("pow exponent must be a non-negative integer constant");
    }
    return Expr(std::make_shared<const Node>(Node{Binary{op, std::move(lhs), std::move(rhs)}}));
}

inline bool Expr::is_constant() const noexcept { return std::holds_alternative<Constant>(node_->data); }

inline bool Expr::is_constant(double v) const noexcept {
    const auto* c = std::get_if<Constant>(&node_->data);
    return c != nullptr && c->value == v;
}

inline bool Expr::is_variable() const noexcept { return std::holds_alternative<Variable>(node_->data); }

inline double Expr::value() const noexcept {
    const auto* c = std::get_if<Constant>(&node_->data);
    return c ? c->value : std::numeric_limits<double>::quiet_NaN();
}

inline const std::string& Expr::name() const noexcept {
    static const std::string empty;
    const auto* v = std::get_if<Variable>(&node_->data);
    return v ? v->name : empty;
}

/// Structural equality (same tree shape, ops, names and constant bits).
inline bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    const auto& x = a.node_->data;
    const auto& y = b.node_->data;
    if (x.index() != y.index()) return false;
    if (const auto* c = std::get_if<Constant>(&x)) return c->value == std::get<Constant>(y).value;
    if (const auto* v = std::get_if<Variable>(&x)) return v->name == std::get<Variable>(y).name;
    if (const auto* u = std::get_if<Unary>(&x)) {
        const auto& w = std::get<Unary>(y);
        return u->op == w.op && u->child == w.child;
    }
    const auto& p = std::get<Binary>(x);
    const auto& q = std::get<Binary>(y);
    return p.op == q.op && p.lhs == q.lhs && p.rhs == q.rhs;
}

inline Expr operator+(Expr a, Expr b) { return Expr::binary(BinaryOp::add, std::move(a), std::move(b)); }
inline Expr operator-(Expr a, Expr b) { return Expr::binary(BinaryOp::sub, std::move(a), std::move(b)); }
inline Expr operator*(Expr a, Expr b) { return Expr::binary(BinaryOp::mul, std::move(a), std::move(b)); }
inline Expr operator/(Expr a, Expr b) { return Expr::binary(BinaryOp::div, std::move(a), std::move(b)); }
inline Expr operator-(Expr a) { return Expr::unary(UnaryOp::neg, std::move(a)); }
inline Expr pow(Expr base, int exponent) {
    return Expr::binary(BinaryOp::pow, std::move(base), Expr::constant(exponent));
}
inline Expr sin(Expr a) { return Expr::unary(UnaryOp::sin, std::move(a)); }
inline Expr cos(Expr a) { return Expr::unary(UnaryOp::cos, std::move(a)); }
inline Expr exp(Expr a) { return Expr::unary(UnaryOp::exp, std::move(a)); }

// ---------------------------------------------------------------------------
// Numeric kernels shared by folding, tree evaluation and compiled evaluation,
// so that all three paths perform the same IEEE operations.

namespace detail {

inline double apply_unary(UnaryOp op, double x) {
    switch (op) {
        case UnaryOp::neg: return -x;
        case UnaryOp::sin: return std::sin(x);
        case UnaryOp::cos: return std::cos(x);
        case UnaryOp::exp: return std::exp(x);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

inline double apply_binary(BinaryOp op, double a, double b) {
    switch (op) {
        case BinaryOp::add: return a + b;
        case BinaryOp::sub: return a - b;
        case BinaryOp::mul: return a * b;
        case BinaryOp::div:
            if (b == 0.0) throw DivisionByZero();
            return a / b;
        case BinaryOp::pow: return std::pow(a, b);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Evaluation

/// Evaluates `e` with IEEE double arithmetic. Throws MissingBinding for an
/// unbound variable and DivisionByZero when a denominator evaluates to 0.
inline double eval(const Expr& e, const VarBinding& b) {
    return std::visit(
        [&](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return n.value;
            } else if constexpr (std::is_same_v<T, Variable>) {
                auto it = b.find(n.name);
                if (it == b.end()) throw MissingBinding(n.name);
                return it->second;
            } else if constexpr (std::is_same_v<T, Unary>) {
                return detail::apply_unary(n.op, eval(n.child, b));
            } else {
                const double lhs = eval(n.lhs, b);
                return detail::apply_binary(n.op, lhs, eval(n.rhs, b));
            }
        },
        e.node().data);
}

// ---------------------------------------------------------------------------
// Folding

namespace detail {

inline const Unary* as_neg(const Expr& e) {
    const auto* u = std::get_if<Unary>(&e.node().data);
    return (u && u->op == UnaryOp::neg) ? u : nullptr;
}

inline const Binary* as_binary(const Expr& e, BinaryOp op) {
    const auto* b = std::get_if<Binary>(&e.node().data);
    return (b && b->op == op) ? b : nullptr;
}

// The make_* helpers assume already-folded operands and return folded results.

inline Expr make_neg(const Expr& x) {
    if (x.is_constant()) return Expr::constant(-x.value());
    if (const auto* u = as_neg(x)) return u->child;
    return Expr::unary(UnaryOp::neg, x);
}

inline Expr make_unary(UnaryOp op, const Expr& x) {
    if (op == UnaryOp::neg) return make_neg(x);
    if (x.is_constant()) return Expr::constant(apply_unary(op, x.value()));
    return Expr::unary(op, x);
}

inline Expr make_sub(const Expr& l, const Expr& r);

inline Expr make_add(const Expr& l, const Expr& r) {
    if (l.is_constant() && r.is_constant()) return Expr::constant(l.value() + r.value());
    if (r.is_constant(0.0)) return l;
    if (l.is_constant(0.0)) return r;
    if (const auto* u = as_neg(r)) return make_sub(l, u->child);
    if (const auto* u = as_neg(l)) return make_sub(r, u->child);
    return Expr::binary(BinaryOp::add, l, r);
}

inline Expr make_sub(const Expr& l, const Expr& r) {
    if (l.is_constant() && r.is_constant()) return Expr::constant(l.value() - r.value());
    if (r.is_constant(0.0)) return l;
    if (l.is_constant(0.0)) return make_neg(r);
    if (const auto* u = as_neg(r)) return make_add(l, u->child);
    return Expr::binary(BinaryOp::sub, l, r);
}

inline Expr make_mul(const Expr& l, const Expr& r) {
    if (l.is_constant() && r.is_constant()) return Expr::constant(l.value() * r.value());
    if (l.is_constant(0.0) || r.is_constant(0.0)) return Expr::constant(0.0);
    if (l.is_constant(1.0)) return r;
    if (r.is_constant(1.0)) return l;
    if (l.is_constant(-1.0)) return make_neg(r);
    if (r.is_constant(-1.0)) return make_neg(l);
    if (const auto* u = as_neg(l)) return make_neg(make_mul(u->child, r));
    if (const auto* u = as_neg(r)) return make_neg(make_mul(l, u->child));
    // constants to the left, then gather c1*(c2*x) -> (c1*c2)*x
    if (r.is_constant()) return make_mul(r, l);
    if (l.is_constant()) {
        if (const auto* b = as_binary(r, BinaryOp::mul); b && b->lhs.is_constant())
            return make_mul(Expr::constant(l.value() * b->lhs.value()), b->rhs);
    }
    return Expr::binary(BinaryOp::mul, l, r);
}

inline Expr make_div(const Expr& l, const Expr& r) {
    if (r.is_constant(0.0)) throw DivisionByZero();
    if (l.is_constant() && r.is_constant()) return Expr::constant(l.value() / r.value());
    if (r.is_constant(1.0)) return l;
    if (const auto* u = as_neg(l)) return make_neg(make_div(u->child, r));
    if (const auto* u = as_neg(r)) return make_neg(make_div(l, u->child));
    if (r.is_constant()) {
        if (const auto* b = as_binary(l, BinaryOp::mul); b && b->lhs.is_constant())
            return make_mul(Expr::constant(b->lhs.value() / r.value()), b->rhs);
    }
    return Expr::binary(BinaryOp::div, l, r);
}

inline Expr make_pow(const Expr& base, int n) {
    if (n == 0) return Expr::constant(1.0);
    if (n == 1) return base;
    if (base.is_constant()) return Expr::constant(std::pow(base.value(), static_cast<double>(n)));
    if (const auto* u = as_neg(base)) {
        Expr p = make_pow(u->child, n);
        return (n % 2 == 0) ? p : make_neg(p);
    }
    return Expr::binary(BinaryOp::pow, base, Expr::constant(n));
}

inline Expr make_binary(BinaryOp op, const Expr& l, const Expr& r) {
    switch (op) {
        case BinaryOp::add: return make_add(l, r);
        case BinaryOp::sub: return make_sub(l, r);
        case BinaryOp::mul: return make_mul(l, r);
        case BinaryOp::div: return make_div(l, r);
        case BinaryOp::pow: return make_pow(l, static_cast<int>(r.value()));
    }
    return Expr::binary(op, l, r);
}

}  // namespace detail

/// Folds constant subtrees and applies x+0 -> x, x*1 -> x, x*0 -> 0,
/// x^1 -> x, together with sign and constant normalizations that preserve
/// the value. Throws DivisionByZero when a denominator folds to 0.
inline Expr simplify_fold(const Expr& e) {
    return std::visit(
        [&](const auto& n) -> Expr {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Constant> || std::is_same_v<T, Variable>) {
                return e;
            } else if constexpr (std::is_same_v<T, Unary>) {
                return detail::make_unary(n.op, simplify_fold(n.child));
            } else {
                return detail::make_binary(n.op, simplify_fold(n.lhs), simplify_fold(n.rhs));
            }
        },
        e.node().data);
}

// ---------------------------------------------------------------------------
// Differentiation

namespace detail {

// Derivative of an already-folded expression.
inline Expr diff_folded(const Expr& e, std::string_view var) {
    return std::visit(
        [&](const auto& n) -> Expr {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return Expr::constant(0.0);
            } else if constexpr (std::is_same_v<T, Variable>) {
                return Expr::constant(n.name == var ? 1.0 : 0.0);
            } else if constexpr (std::is_same_v<T, Unary>) {
                Expr dc = diff_folded(n.child, var);
                if (dc.is_constant(0.0)) return dc;
                switch (n.op) {
                    case UnaryOp::neg: return make_neg(dc);
                    case UnaryOp::sin: return make_mul(make_unary(UnaryOp::cos, n.child), dc);
                    case UnaryOp::cos:
                        return make_mul(make_neg(make_unary(UnaryOp::sin, n.child)), dc);
                    case UnaryOp::exp: return make_mul(e, dc);
                }
                return dc;
            } else {
                Expr dl = diff_folded(n.lhs, var);
                switch (n.op) {
                    case BinaryOp::add: return make_add(dl, diff_folded(n.rhs, var));
                    case BinaryOp::sub: return make_sub(dl, diff_folded(n.rhs, var));
                    case BinaryOp::mul: {
                        Expr dr = diff_folded(n.rhs, var);
                        return make_add(make_mul(dl, n.rhs), make_mul(n.lhs, dr));
                    }
                    case BinaryOp::div: {
                        Expr dr = diff_folded(n.rhs, var);
                        if (dr.is_constant(0.0)) return make_div(dl, n.rhs);
                        return make_div(make_sub(make_mul(dl, n.rhs), make_mul(n.lhs, dr)),
                                        make_pow(n.rhs, 2));
                    }
                    case BinaryOp::pow: {
                        if (dl.is_constant(0.0)) return dl;
                        const int p = static_cast<int>(n.rhs.value());
                        return make_mul(make_mul(Expr::constant(p), make_pow(n.lhs, p - 1)), dl);
                    }
                }
                return dl;
            }
        },
        e.node().data);
}

}  // namespace detail

/// Exact symbolic partial derivative with respect to `var`, folded. The
/// derivative with respect to a variable that does not occur is 0.
inline Expr diff(const Expr& e, std::string_view var) {
    return detail::diff_folded(simplify_fold(e), var);
}

// ---------------------------------------------------------------------------
// Free variables

namespace detail {
inline void collect_vars(const Expr& e, std::set<std::string>& out) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Variable>) {
                out.insert(n.name);
            } else if constexpr (std::is_same_v<T, Unary>) {
                collect_vars(n.child, out);
            } else if constexpr (std::is_same_v<T, Binary>) {
                collect_vars(n.lhs, out);
                collect_vars(n.rhs, out);
            }
        },
        e.node().data);
}
}  // namespace detail

/// Variable names occurring in the folded tree.
inline std::set<std::string> free_vars(const Expr& e) {
    std::set<std::string> out;
    detail::collect_vars(simplify_fold(e), out);
    return out;
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

// 1: + -   2: * /   3: unary minus   4: ^   5: atom
inline int precedence(const Expr& e) {
    const auto& d = e.node().data;
    if (const auto* c = std::get_if<Constant>(&d)) return (c->value < 0 || std::signbit(c->value)) ? 3 : 5;
    if (std::holds_alternative<Variable>(d)) return 5;
    if (const auto* u = std::get_if<Unary>(&d)) return u->op == UnaryOp::neg ? 3 : 5;
    switch (std::get<Binary>(d).op) {
        case BinaryOp::add:
        case BinaryOp::sub: return 1;
        case BinaryOp::mul:
        case BinaryOp::div: return 2;
        case BinaryOp::pow: return 4;
    }
    return 5;
}

inline std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline void print(const Expr& e, std::string& out);

inline void print_wrapped(const Expr& e, bool parens, std::string& out) {
    if (parens) out += '(';
    print(e, out);
    if (parens) out += ')';
}

inline void print(const Expr& e, std::string& out) {
    const auto& d = e.node().data;
    if (const auto* c = std::get_if<Constant>(&d)) {
        out += format_number(c->value);
    } else if (const auto* v = std::get_if<Variable>(&d)) {
        out += v->name;
    } else if (const auto* u = std::get_if<Unary>(&d)) {
        switch (u->op) {
            case UnaryOp::neg:
                out += '-';
                print_wrapped(u->child, precedence(u->child) < 3, out);
                return;
            case UnaryOp::sin: out += "sin("; break;
            case UnaryOp::cos: out += "cos("; break;
            case UnaryOp::exp: out += "exp("; break;
        }
        print(u->child, out);
        out += ')';
    } else {
        const auto& b = std::get<Binary>(d);
        const int pl = precedence(b.lhs);
        const int pr = precedence(b.rhs);
        switch (b.op) {
            case BinaryOp::add:
                print_wrapped(b.lhs, pl < 1, out);
                out += " + ";
                print_wrapped(b.rhs, pr <= 1, out);
                break;
            case BinaryOp::sub:
                print_wrapped(b.lhs, pl < 1, out);
                out += " - ";
                print_wrapped(b.rhs, pr <= 1, out);
                break;
            case BinaryOp::mul:
                print_wrapped(b.lhs, pl < 2, out);
                out += '*';
                print_wrapped(b.rhs, pr <= 2, out);
                break;
            case BinaryOp::div:
                print_wrapped(b.lhs, pl < 2, out);
                out += '/';
                print_wrapped(b.rhs, pr <= 2, out);
                break;
            case BinaryOp::pow:
                print_wrapped(b.lhs, pl < 5, out);
                out += '^';
                out += std::to_string(static_cast<long long>(b.rhs.value()));
                break;
        }
    }
}

}  // namespace detail

/// Infix text that parses back to an expression with identical values.
inline std::string to_string(const Expr& e) {
    std::string out;
    detail::print(e, out);
    return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Parser {
public:
    Parser(std::string_view src, const ChartSpec& chart) : src_(src), chart_(chart) {}

    Expr parse() {
        Expr e = expr();
        skip_ws();
        if (pos_ != src_.size()) throw SyntaxError(pos_, "end of input");
        return e;
    }

private:
    Expr expr() {
        Expr lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = Expr::binary(BinaryOp::add, lhs, term());
            } else if (accept('-')) {
                lhs = Expr::binary(BinaryOp::sub, lhs, term());
            } else {
                return lhs;
            }
        }
    }

    Expr term() {
        Expr lhs = factor();
        for (;;) {
            if (accept('*')) {
                lhs = Expr::binary(BinaryOp::mul, lhs, factor());
            } else if (accept('/')) {
                lhs = Expr::binary(BinaryOp::div, lhs, factor());
            } else {
                return lhs;
            }
        }
    }

    // unary minus binds looser than ^ : -x^2 == -(x^2)
    Expr factor() {
        if (accept('-')) return Expr::unary(UnaryOp::neg, factor());
        Expr b = base();
        if (accept('^')) return Expr::binary(BinaryOp::pow, b, Expr::constant(exponent()));
        return b;
    }

    // integer ('^' exponent)?, right associative
    double exponent() {
        skip_ws();
        const std::size_t start = pos_;
        long long n = 0;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            n = n * 10 + (src_[pos_] - '0');
            if (n > std::numeric_limits<std::int32_t>::max()) throw SyntaxError(start, "integer exponent");
            ++pos_;
        }
        if (pos_ == start) throw SyntaxError(start, "integer exponent");
        if (accept('^')) {
            const double inner = exponent();
            const double p = std::pow(static_cast<double>(n), inner);
            if (p > std::numeric_limits<std::int32_t>::max()) throw SyntaxError(start, "integer exponent");
            return p;
        }
        return static_cast<double>(n);
    }

    Expr base() {
        skip_ws();
        if (pos_ >= src_.size()) throw SyntaxError(pos_, "number, identifier or '('");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            const std::string_view ident = src_.substr(start, pos_ - start);
            if (ident == "sin" || ident == "cos" || ident == "exp") {
                const UnaryOp op = ident == "sin" ? UnaryOp::sin : ident == "cos" ? UnaryOp::cos : UnaryOp::exp;
                expect('(');
                Expr arg = expr();
                expect(')');
                return Expr::unary(op, arg);
            }
            if (!chart_.symbol_index(ident)) throw UnknownVariable(std::string(ident));
            return Expr::variable(std::string(ident));
        }
        throw SyntaxError(pos_, "number, identifier or '('");
    }

    Expr number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            const std::size_t s = pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            return pos_ - s;
        };
        std::size_t n = digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            n += digits();
        }
        if (n == 0) throw SyntaxError(start, "number");
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (digits() == 0) throw SyntaxError(pos_, "exponent digits");
        }
        double value = 0.0;
        const auto res = std::from_chars(src_.data() + start, src_.data() + pos_, value);
        if (res.ec != std::errc() || res.ptr != src_.data() + pos_) throw SyntaxError(start, "number");
        return Expr::constant(value);
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) throw SyntaxError(pos_, std::string("'") + c + "'");
    }

    std::string_view src_;
    const ChartSpec& chart_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses infix source into an (unfolded) Expr. Identifiers must belong to
/// the chart's symbol set.
///
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := '-' factor | base ('^' integer)?
///   base   := number | ident | func '(' expr ')' | '(' expr ')'
inline Expr parse(std::string_view source, const ChartSpec& chart) {
    return detail::Parser(source, chart).parse();
}

// ---------------------------------------------------------------------------
// Compiled evaluation

/// Flat stack program for fast repeated evaluation at points given as flat
/// coordinate vectors in chart order (I, z, phi).
class CompiledExpr {
public:
    CompiledExpr() = default;

    CompiledExpr(const Expr& e, const ChartSpec& chart) {
        int depth = 0;
        emit(e, chart, depth);
    }

    double operator()(std::span<const double> x) const {
        constexpr std::size_t small = 64;
        if (max_depth_ <= small) {
            std::array<double, small> stack;
            return run(x, stack.data());
        }
        std::vector<double> stack(max_depth_);
        return run(x, stack.data());
    }

    bool is_constant() const noexcept { return code_.size() == 1 && code_[0].op == Op::constant; }
    std::size_t size() const noexcept { return code_.size(); }

private:
    enum class Op : std::uint8_t { constant, variable, neg, sin, cos, exp, add, sub, mul, div, pow };
    struct Instr {
        Op op;
        std::uint32_t index;
        double value;
    };

    void push(Instr in, int& depth, int delta) {
        code_.push_back(in);
        depth += delta;
        max_depth_ = std::max<std::size_t>(max_depth_, static_cast<std::size_t>(depth));
    }

    void emit(const Expr& e, const ChartSpec& chart, int& depth) {
        const auto& d = e.node().data;
        if (const auto* c = std::get_if<Constant>(&d)) {
            push({Op::constant, 0, c->value}, depth, 1);
        } else if (const auto* v = std::get_if<Variable>(&d)) {
            const auto idx = chart.symbol_index(v->name);
            if (!idx) throw UnknownVariable(v->name);
            push({Op::variable, static_cast<std::uint32_t>(*idx), 0.0}, depth, 1);
        } else if (const auto* u = std::get_if<Unary>(&d)) {
            emit(u->child, chart, depth);
            static constexpr Op ops[] = {Op::neg, Op::sin, Op::cos, Op::exp};
            push({ops[static_cast<int>(u->op)], 0, 0.0}, depth, 0);
        } else {
            const auto& b = std::get<Binary>(d);
            emit(b.lhs, chart, depth);
            if (b.op == BinaryOp::pow) {
                push({Op::pow, 0, b.rhs.value()}, depth, 0);
                return;
            }
            emit(b.rhs, chart, depth);
            static constexpr Op ops[] = {Op::add, Op::sub, Op::mul, Op::div};
            push({ops[static_cast<int>(b.op)], 0, 0.0}, depth, -1);
        }
    }

    double run(std::span<const double> x, double* st) const {
        std::size_t sp = 0;
        for (const Instr& in : code_) {
            switch (in.op) {
                case Op::constant: st[sp++] = in.value; break;
                case Op::variable: st[sp++] = x[in.index]; break;
                case Op::neg: st[sp - 1] = -st[sp - 1]; break;
                case Op::sin: st[sp - 1] = std::sin(st[sp - 1]); break;
                case Op::cos: st[sp - 1] = std::cos(st[sp - 1]); break;
                case Op::exp: st[sp - 1] = std::exp(st[sp - 1]); break;
                case Op::pow: st[sp - 1] = std::pow(st[sp - 1], in.value); break;
                case Op::add: --sp; st[sp - 1] = st[sp - 1] + st[sp]; break;
                case Op::sub: --sp; st[sp - 1] = st[sp - 1] - st[sp]; break;
                case Op::mul: --sp; st[sp - 1] = st[sp - 1] * st[sp]; break;
                case Op::div:
                    --sp;
                    if (st[sp] == 0.0) throw DivisionByZero();
                    st[sp - 1] = st[sp - 1] / st[sp];
                    break;
            }
        }
        return st[0];
    }

    std::vector<Instr> code_;
    std::size_t max_depth_ = 0;
};

/// Binding of every chart symbol to the matching entry of a flat point.
inline VarBinding binding_from_point(const ChartSpec& chart, std::span<const double> x) {
    VarBinding b;
    for (std::size_t j = 0; j < chart.dim(); ++j) b.emplace(chart.symbol_name(j), x[j]);
    return b;
}

/// Number of random points used by is_identically_zero.
inline constexpr int zero_test_samples = 100;
inline constexpr double zero_test_threshold = 1e-12;

/// True when `e` folds to the constant 0, or when |e| <= 1e-12 at 100
/// uniform random points of the chart's box.
inline bool is_identically_zero(const Expr& e, const ChartSpec& chart, std::uint64_t seed = 0) {
    const Expr folded = simplify_fold(e);
    if (folded.is_constant()) return folded.value() == 0.0;
    const CompiledExpr f(folded, chart);
    Rng rng(seed, 0x5a3e);
    for (int s = 0; s < zero_test_samples; ++s) {
        const auto x = chart.sample_point(rng);
        if (!(std::abs(f(x)) <= zero_test_threshold)) return false;
    }
    return true;
}

/// True when `e` does not depend on any angle coordinate.
inline bool is_angle_independent(const Expr& e, const ChartSpec& chart) {
    const auto vars = free_vars(e);
    for (std::size_t i = 0; i < chart.k(); ++i) {
        const std::string name = ChartSpec::angle_name(i);
        if (vars.contains(name) && !is_identically_zero(diff(e, name), chart)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Random expressions (property tests, Jacobi sampling)

/// Random polynomial-trigonometric expression over the chart symbols. No
/// division, so every instance evaluates everywhere.
inline Expr random_poly_trig(const ChartSpec& chart, Rng& rng, int depth = 3) {
    auto leaf = [&]() -> Expr {
        if (rng.uniform01() < 0.25) return Expr::constant(static_cast<double>(rng.uniform_int(-3, 3)) / 2.0);
        return Expr::variable(chart.symbol_name(static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(chart.dim()) - 1))));
    };
    if (depth <= 0) return leaf();
    switch (rng.uniform_int(0, 7)) {
        case 0: return random_poly_trig(chart, rng, depth - 1) + random_poly_trig(chart, rng, depth - 1);
        case 1: return random_poly_trig(chart, rng, depth - 1) - random_poly_trig(chart, rng, depth - 1);
        case 2:
        case 3: return random_poly_trig(chart, rng, depth - 1) * random_poly_trig(chart, rng, depth - 1);
        case 4: return pow(leaf(), rng.uniform_int(2, 3));
        case 5: return sin(random_poly_trig(chart, rng, depth - 1));
        case 6: return cos(random_poly_trig(chart, rng, depth - 1));
        default: return -random_poly_trig(chart, rng, depth - 1);
    }
}

}  // namespace pistlab
