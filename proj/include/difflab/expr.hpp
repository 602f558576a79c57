#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace difflab::expr {

/// Operations of the expression language. Constants `pi` and `e` parse to Const.
enum class Op : std::uint8_t {
    Const,
    Var,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
};

struct Node {
    Op op = Op::Const;
    double value = 0.0;
    std::vector<Node> args;

    friend bool operator==(const Node&, const Node&) = default;
};

/// Result of tagged evaluation. Evaluation never throws: domain errors
/// (log of a negative number, 0/0, ...) come back as Status::Domain.
struct Value {
    enum class Status : std::uint8_t { Finite, Infinite, Domain };
    double value;
    Status status;

    bool finite() const noexcept { return status == Status::Finite; }
};

/// A parsed expression in the single variable `x`.
///
/// Grammar (lowest to highest precedence):
///
///     expr    := term (('+' | '-') term)*
///     term    := unary (('*' | '/') unary)*
///     unary   := ('-' | '+') unary | power
///     power   := primary ('^' unary)?          right-associative
///     primary := number | 'x' | 'pi' | 'e' | func '(' args ')' | '(' expr ')'
///     func    := exp | log | sqrt | abs | pow | min | max
///
/// so `-x^2` is `-(x^2)` and `2^-x^2` is `2^(-(x^2))`.
///
/// The tree is compiled once into a postfix program; evaluation is
/// allocation-free and reentrant.
class Expr {
public:
    Expr();  // the constant 0

    /// Throws SyntaxError{position, expected}.
    static Expr parse(std::string_view text);
    static Expr constant(double c);
    static Expr variable();

    double operator()(double x) const noexcept;
    double eval(double x) const noexcept { return (*this)(x); }
    Value evaluate(double x) const noexcept;

    const Node& ast() const noexcept { return root_; }
    const std::string& source() const noexcept { return source_; }

    /// Fully parenthesized, round-trips through parse().
    std::string to_string() const;

    bool is_constant() const noexcept { return constant_; }
    /// True when the expression is the literal zero (possibly negated or parenthesized).
    bool is_zero() const noexcept;

private:
    struct Instr {
        Op op;
        double value;
    };

    explicit Expr(Node root, std::string source);
    void compile();

    Node root_;
    std::string source_;
    std::vector<Instr> program_;
    int max_depth_ = 0;
    bool constant_ = true;
};

std::string to_string(const Node& node);

}  // namespace difflab::expr
