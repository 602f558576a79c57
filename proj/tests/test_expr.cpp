#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "difflab/errors.hpp"
#include "difflab/expr.hpp"

using difflab::SyntaxError;
using difflab::expr::Expr;
using difflab::expr::Node;
using difflab::expr::Op;
using Status = difflab::expr::Value::Status;

TEST(ExprParse, DivisionTree) {
    const Expr e = Expr::parse("1/x");
    const Node& n = e.ast();
    ASSERT_EQ(n.op, Op::Div);
    ASSERT_EQ(n.args.size(), 2u);
    EXPECT_EQ(n.args[0].op, Op::Const);
    EXPECT_EQ(n.args[0].value, 1.0);
    EXPECT_EQ(n.args[1].op, Op::Var);
}

TEST(ExprParse, PowerAndUnaryMinus) {
    EXPECT_EQ(Expr::parse("x^2")(3.0), 9.0);
    EXPECT_EQ(Expr::parse("-x^2")(2.0), -4.0);
    EXPECT_EQ(Expr::parse("2^3^2")(0.0), 512.0);
    EXPECT_EQ(Expr::parse("2^-1")(0.0), 0.5);
    EXPECT_EQ(Expr::parse("(-x)^2")(2.0), 4.0);
    EXPECT_EQ(Expr::parse("2*-x")(3.0), -6.0);
    EXPECT_EQ(Expr::parse("1-2-3")(0.0), -4.0);
    EXPECT_EQ(Expr::parse("8/4/2")(0.0), 1.0);
    EXPECT_EQ(Expr::parse("1+2*3")(0.0), 7.0);
}

TEST(ExprParse, FunctionsAndConstants) {
    EXPECT_EQ(Expr::parse("exp(-x^2)")(0.0), 1.0);
    EXPECT_DOUBLE_EQ(Expr::parse("pi")(0.0), std::numbers::pi);
    EXPECT_DOUBLE_EQ(Expr::parse("e")(0.0), std::numbers::e);
    EXPECT_DOUBLE_EQ(Expr::parse("pow(x, 3)")(2.0), 8.0);
    EXPECT_EQ(Expr::parse("min(x, 1)")(3.0), 1.0);
    EXPECT_EQ(Expr::parse("max(x, 1)")(3.0), 3.0);
    EXPECT_EQ(Expr::parse("abs(x)")(-3.0), 3.0);
    EXPECT_EQ(Expr::parse("sqrt(x)")(16.0), 4.0);
    EXPECT_DOUBLE_EQ(Expr::parse("log(e)")(0.0), 1.0);
    EXPECT_EQ(Expr::parse(" .5e1 + 1E-1 ")(0.0), 5.1);
}

TEST(ExprParse, ExpIdentifierIsNotScientificNotation) {
    EXPECT_DOUBLE_EQ(Expr::parse("2*e")(0.0), 2.0 * std::numbers::e);
    EXPECT_THROW(Expr::parse("2e"), SyntaxError);
}

TEST(ExprParse, SyntaxErrorsCarryPosition) {
    struct Case {
        const char* text;
        std::size_t pos;
    };
    for (const Case c : {Case{"1 +", 3}, Case{"(x", 2}, Case{"x y", 2}, Case{"foo(x)", 0}, Case{"exp x", 4},
                         Case{"pow(x)", 5}, Case{"", 0}, Case{"x $ 1", 2}}) {
        try {
            Expr::parse(c.text);
            ADD_FAILURE() << "no error for " << c.text;
        } catch (const SyntaxError& err) {
            EXPECT_EQ(err.position(), c.pos) << c.text;
            EXPECT_FALSE(err.expected().empty());
            EXPECT_NE(std::string(err.what()).find("byte " + std::to_string(c.pos)), std::string::npos);
        }
    }
}

TEST(ExprEval, TaggedNonFinite) {
    const auto inv = Expr::parse("1/x").evaluate(0.0);
    EXPECT_EQ(inv.status, Status::Infinite);
    EXPECT_TRUE(std::isinf(inv.value));
    const auto lg = Expr::parse("log(x)").evaluate(-1.0);
    EXPECT_EQ(lg.status, Status::Domain);
    EXPECT_EQ(Expr::parse("0/x").evaluate(0.0).status, Status::Domain);
    EXPECT_EQ(Expr::parse("sqrt(x)").evaluate(4.0).status, Status::Finite);
}

TEST(ExprEval, ConstantDetection) {
    EXPECT_TRUE(Expr::parse("-(0)").is_zero());
    EXPECT_TRUE(Expr::parse("2*pi").is_constant());
    EXPECT_FALSE(Expr::parse("0*x").is_zero());
    EXPECT_TRUE(Expr().is_zero());
}

TEST(ExprEval, DeepNestingUsesHeapStack) {
    std::string text = "x";
    for (int i = 0; i < 100; ++i) text = "(1 + " + text + ")";
    std::string rhs = "x";
    for (int i = 0; i < 100; ++i) rhs = "1 + (" + rhs + ")";
    EXPECT_EQ(Expr::parse(text)(0.5), 100.5);
    std::string right = "x";
    for (int i = 0; i < 80; ++i) right = "x + (" + right + ")";
    EXPECT_EQ(Expr::parse(right)(1.0), 81.0);
}

namespace {

// Random trees printed with the minimum parentheses the grammar allows.
class Generator {
public:
    explicit Generator(std::uint64_t seed) : rng_(seed) {}

    Node tree(int depth) {
        std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 13);
        switch (pick(rng_)) {
            case 0: return constant();
            case 1: return Node{Op::Var, 0.0, {}};
            case 2: return Node{Op::Neg, 0.0, {tree(depth - 1)}};
            case 3: return bin(Op::Add, depth);
            case 4: return bin(Op::Sub, depth);
            case 5: return bin(Op::Mul, depth);
            case 6: return bin(Op::Div, depth);
            case 7: return bin(Op::Pow, depth);
            case 8: return Node{Op::Exp, 0.0, {tree(depth - 1)}};
            case 9: return Node{Op::Log, 0.0, {tree(depth - 1)}};
            case 10: return Node{Op::Sqrt, 0.0, {tree(depth - 1)}};
            case 11: return Node{Op::Abs, 0.0, {tree(depth - 1)}};
            case 12: return bin(Op::Min, depth);
            default: return bin(Op::Max, depth);
        }
    }

    double point() { return std::uniform_real_distribution<double>(-3.0, 3.0)(rng_); }

private:
    Node constant() {
        std::uniform_int_distribution<int> kind(0, 2);
        switch (kind(rng_)) {
            case 0: return Node{Op::Const, static_cast<double>(std::uniform_int_distribution<int>(0, 9)(rng_)), {}};
            case 1: return Node{Op::Const, std::uniform_real_distribution<double>(0.0, 5.0)(rng_), {}};
            default: return Node{Op::Const, std::ldexp(1.0, std::uniform_int_distribution<int>(-20, 20)(rng_)), {}};
        }
    }
    Node bin(Op op, int depth) { return Node{op, 0.0, {tree(depth - 1), tree(depth - 1)}}; }

    std::mt19937_64 rng_;
};

int level(const Node& n) {
    switch (n.op) {
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        default: return 5;
    }
}

std::string minimal(const Node& n);

std::string at_least(const Node& n, int lvl) {
    const std::string s = minimal(n);
    return level(n) >= lvl ? s : "(" + s + ")";
}

std::string minimal(const Node& n) {
    switch (n.op) {
        case Op::Const: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", n.value);
            return buf;
        }
        case Op::Var: return "x";
        case Op::Neg: return "-" + at_least(n.args[0], 3);
        case Op::Add: return at_least(n.args[0], 1) + "+" + at_least(n.args[1], 2);
        case Op::Sub: return at_least(n.args[0], 1) + " - " + at_least(n.args[1], 2);
        case Op::Mul: return at_least(n.args[0], 2) + "*" + at_least(n.args[1], 3);
        case Op::Div: return at_least(n.args[0], 2) + " / " + at_least(n.args[1], 3);
        case Op::Pow: return at_least(n.args[0], 5) + "^" + at_least(n.args[1], 3);
        case Op::Exp: return "exp(" + minimal(n.args[0]) + ")";
        case Op::Log: return "log(" + minimal(n.args[0]) + ")";
        case Op::Sqrt: return "sqrt(" + minimal(n.args[0]) + ")";
        case Op::Abs: return "abs(" + minimal(n.args[0]) + ")";
        case Op::Min: return "min(" + minimal(n.args[0]) + "," + minimal(n.args[1]) + ")";
        case Op::Max: return "max(" + minimal(n.args[0]) + ", " + minimal(n.args[1]) + ")";
    }
    return {};
}

double reference(const Node& n, double x) {
    auto a = [&](int i) { return reference(n.args[i], x); };
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Var: return x;
        case Op::Neg: return -a(0);
        case Op::Add: return a(0) + a(1);
        case Op::Sub: return a(0) - a(1);
        case Op::Mul: return a(0) * a(1);
        case Op::Div: return a(0) / a(1);
        case Op::Pow: return std::pow(a(0), a(1));
        case Op::Exp: return std::exp(a(0));
        case Op::Log: return std::log(a(0));
        case Op::Sqrt: return std::sqrt(a(0));
        case Op::Abs: return std::fabs(a(0));
        case Op::Min: return std::fmin(a(0), a(1));
        case Op::Max: return std::fmax(a(0), a(1));
    }
    return 0.0;
}

bool same(double a, double b) {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    if (std::isinf(a) || std::isinf(b)) return a == b;
    return std::fabs(a - b) <= 1e-14 * std::fmax(1.0, std::fabs(b));
}

}  // namespace

TEST(ExprProperty, FuzzAgainstReferenceEvaluator) {
    Generator gen(20240917);
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        const Node tree = gen.tree(5);
        const std::string text = minimal(tree);
        const Expr e = Expr::parse(text);
        ASSERT_EQ(e.ast(), tree) << text;
        const double x = gen.point();
        const double got = e(x);
        const double want = reference(tree, x);
        EXPECT_TRUE(same(got, want)) << text << " at x=" << x << ": " << got << " vs " << want;
        ++checked;
    }
    EXPECT_EQ(checked, 1000);
}

TEST(ExprProperty, PrintParseIsIdempotent) {
    Generator gen(77);
    for (int i = 0; i < 500; ++i) {
        const Node tree = gen.tree(6);
        const Expr first = Expr::parse(minimal(tree));
        const Expr second = Expr::parse(first.to_string());
        EXPECT_EQ(first.ast(), second.ast()) << first.to_string();
        EXPECT_EQ(second.to_string(), first.to_string());
    }
}
