#include "difflab/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <utility>

#include "difflab/errors.hpp"

namespace difflab::expr {

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Node parse() {
        Node n = expression();
        skip_space();
        if (pos_ != text_.size()) fail("operator or end of input");
        return n;
    }

private:
    [[noreturn]] void fail(const char* expected) const {
        throw SyntaxError(pos_, expected, std::string(text_));
    }

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                                       text_[pos_] == '\r'))
            ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c, const char* what) {
        if (!accept(c)) fail(what);
    }

    Node expression() {
        Node lhs = term();
        for (;;) {
            if (accept('+'))
                lhs = binary(Op::Add, std::move(lhs), term());
            else if (accept('-'))
                lhs = binary(Op::Sub, std::move(lhs), term());
            else
                return lhs;
        }
    }

    Node term() {
        Node lhs = unary();
        for (;;) {
            if (accept('*'))
                lhs = binary(Op::Mul, std::move(lhs), unary());
            else if (accept('/'))
                lhs = binary(Op::Div, std::move(lhs), unary());
            else
                return lhs;
        }
    }

    Node unary() {
        if (accept('-')) return Node{Op::Neg, 0.0, {unary()}};
        if (accept('+')) return unary();
        return power();
    }

    Node power() {
        Node base = primary();
        if (accept('^')) return binary(Op::Pow, std::move(base), unary());
        return base;
    }

    Node primary() {
        skip_space();
        if (pos_ >= text_.size()) fail("number, variable, function or '('");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Node inner = expression();
            expect(')', "')'");
            return inner;
        }
        if ((c >= '0' && c <= '9') || c == '.') return number();
        if (is_alpha(c)) return identifier();
        fail("number, variable, function or '('");
    }

    static bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
    static bool is_digit(char c) { return c >= '0' && c <= '9'; }

    Node number() {
        const std::size_t start = pos_;
        bool digits = false;
        while (pos_ < text_.size() && is_digit(text_[pos_])) {
            ++pos_;
            digits = true;
        }
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() && is_digit(text_[pos_])) {
                ++pos_;
                digits = true;
            }
        }
        if (!digits) {
            pos_ = start;
            fail("digits");
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
            if (look < text_.size() && is_digit(text_[look])) {
                pos_ = look;
                while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
            }
        }
        double value = 0.0;
        const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (res.ec != std::errc() && res.ec != std::errc::result_out_of_range) {
            pos_ = start;
            fail("number");
        }
        return Node{Op::Const, value, {}};
    }

    Node identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (is_alpha(text_[pos_]) || is_digit(text_[pos_]))) ++pos_;
        const std::string_view name = text_.substr(start, pos_ - start);
        if (name == "x") return Node{Op::Var, 0.0, {}};
        if (name == "pi") return Node{Op::Const, std::numbers::pi, {}};
        if (name == "e") return Node{Op::Const, std::numbers::e, {}};

        struct Fn {
            std::string_view name;
            Op op;
            int arity;
        };
        static constexpr std::array<Fn, 7> functions{{{"exp", Op::Exp, 1},
                                                      {"log", Op::Log, 1},
                                                      {"sqrt", Op::Sqrt, 1},
                                                      {"abs", Op::Abs, 1},
                                                      {"pow", Op::Pow, 2},
                                                      {"min", Op::Min, 2},
                                                      {"max", Op::Max, 2}}};
        for (const auto& fn : functions) {
            if (fn.name != name) continue;
            expect('(', "'(' after function name");
            Node call{fn.op, 0.0, {}};
            call.args.push_back(expression());
            for (int i = 1; i < fn.arity; ++i) {
                expect(',', "','");
                call.args.push_back(expression());
            }
            expect(')', "')'");
            return call;
        }
        pos_ = start;
        fail("x, pi, e or one of exp, log, sqrt, abs, pow, min, max");
    }

    static Node binary(Op op, Node lhs, Node rhs) {
        Node n{op, 0.0, {}};
        n.args.reserve(2);
        n.args.push_back(std::move(lhs));
        n.args.push_back(std::move(rhs));
        return n;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* function_name(Op op) {
    switch (op) {
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        case Op::Abs: return "abs";
        case Op::Pow: return "pow";
        case Op::Min: return "min";
        case Op::Max: return "max";
        default: return "";
    }
}

void print(const Node& n, std::string& out) {
    switch (n.op) {
        case Op::Const: out += format_number(n.value); return;
        case Op::Var: out += 'x'; return;
        case Op::Neg:
            out += "(-";
            print(n.args[0], out);
            out += ')';
            return;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
        case Op::Pow: {
            static constexpr const char* sym[] = {" + ", " - ", " * ", " / ", "^"};
            out += '(';
            print(n.args[0], out);
            out += sym[static_cast<int>(n.op) - static_cast<int>(Op::Add)];
            print(n.args[1], out);
            out += ')';
            return;
        }
        default:
            out += function_name(n.op);
            out += '(';
            for (std::size_t i = 0; i < n.args.size(); ++i) {
                if (i) out += ", ";
                print(n.args[i], out);
            }
            out += ')';
            return;
    }
}

bool has_variable(const Node& n) {
    if (n.op == Op::Var) return true;
    for (const auto& a : n.args)
        if (has_variable(a)) return true;
    return false;
}

}  // namespace

std::string to_string(const Node& node) {
    std::string out;
    print(node, out);
    return out;
}

Expr::Expr() : Expr(Node{Op::Const, 0.0, {}}, "0") {}

Expr::Expr(Node root, std::string source) : root_(std::move(root)), source_(std::move(source)) { compile(); }

Expr Expr::parse(std::string_view text) { return Expr(Parser(text).parse(), std::string(text)); }

Expr Expr::constant(double c) { return Expr(Node{Op::Const, c, {}}, format_number(c)); }

Expr Expr::variable() { return Expr(Node{Op::Var, 0.0, {}}, "x"); }

std::string Expr::to_string() const { return expr::to_string(root_); }

bool Expr::is_zero() const noexcept {
    const Node* n = &root_;
    while (n->op == Op::Neg) n = &n->args[0];
    return n->op == Op::Const && n->value == 0.0;
}

void Expr::compile() {
    program_.clear();
    int depth = 0;
    max_depth_ = 0;
    auto emit = [&](auto&& self, const Node& n) -> void {
        for (const auto& a : n.args) self(self, a);
        program_.push_back({n.op, n.value});
        if (n.op == Op::Const || n.op == Op::Var)
            ++depth;
        else
            depth -= static_cast<int>(n.args.size()) - 1;
        max_depth_ = std::max(max_depth_, depth);
    };
    emit(emit, root_);
    constant_ = !has_variable(root_);
}

namespace {

template <typename Stack>
double run(const auto& program, Stack& st, double x) noexcept {
    int sp = -1;
    for (const auto& in : program) {
        switch (in.op) {
            case Op::Const: st[++sp] = in.value; break;
            case Op::Var: st[++sp] = x; break;
            case Op::Neg: st[sp] = -st[sp]; break;
            case Op::Add: --sp; st[sp] += st[sp + 1]; break;
            case Op::Sub: --sp; st[sp] -= st[sp + 1]; break;
            case Op::Mul: --sp; st[sp] *= st[sp + 1]; break;
            case Op::Div: --sp; st[sp] /= st[sp + 1]; break;
            case Op::Pow: {
                --sp;
                const double e = st[sp + 1];
                st[sp] = (e == 2.0) ? st[sp] * st[sp] : std::pow(st[sp], e);
                break;
            }
            case Op::Exp: st[sp] = std::exp(st[sp]); break;
            case Op::Log: st[sp] = std::log(st[sp]); break;
            case Op::Sqrt: st[sp] = std::sqrt(st[sp]); break;
            case Op::Abs: st[sp] = std::fabs(st[sp]); break;
            case Op::Min: --sp; st[sp] = std::fmin(st[sp], st[sp + 1]); break;
            case Op::Max: --sp; st[sp] = std::fmax(st[sp], st[sp + 1]); break;
        }
    }
    return st[0];
}

}  // namespace

double Expr::operator()(double x) const noexcept {
    if (program_.size() == 1) return program_[0].op == Op::Var ? x : program_[0].value;
    if (max_depth_ <= 32) {
        std::array<double, 32> st;
        return run(program_, st, x);
    }
    std::vector<double> st(static_cast<std::size_t>(max_depth_));
    return run(program_, st, x);
}

Value Expr::evaluate(double x) const noexcept {
    const double v = (*this)(x);
    if (std::isnan(v)) return {v, Value::Status::Domain};
    if (std::isinf(v)) return {v, Value::Status::Infinite};
    return {v, Value::Status::Finite};
}

}  // namespace difflab::expr
