#pragma once

// Arithmetic expressions over the variables t, p1, p2 for user-supplied
// pointwise forcings g(t, p1, p2).
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?
//   primary := number | 't' | 'p1' | 'p2' | func '(' expr ')' | '(' expr ')'
//   func    := sin | cos | tan | tanh | exp | log | sqrt | abs

#include "memorybeam/errors.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace memorybeam {

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t position)
        : Error(message + " at position " + std::to_string(position)), position_(position) {}
    [[nodiscard]] std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class Expression {
public:
    static Expression parse(std::string_view text) {
        Parser p{text, 0, {}};
        Expression e;
        e.root_ = p.expr();
        p.skip();
        if (p.pos != text.size()) throw ParseError("unexpected '" + std::string(1, text[p.pos]) + "'", p.pos);
        e.nodes_ = std::move(p.nodes);
        e.text_ = std::string(text);
        return e;
    }

    [[nodiscard]] double operator()(double t, double p1, double p2) const { return eval(root_, t, p1, p2); }
    [[nodiscard]] const std::string& text() const noexcept { return text_; }
    /// True when the variable occurs anywhere in the expression.
    [[nodiscard]] bool uses(std::string_view var) const {
        const Op op = var == "t" ? Op::T : var == "p1" ? Op::P1 : Op::P2;
        for (const auto& n : nodes_)
            if (n.op == op) return true;
        return false;
    }

private:
    enum class Op { Num, T, P1, P2, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Tan, Tanh, Exp, Log, Sqrt, Abs };

    struct Node {
        Op op;
        double value = 0.0;
        int lhs = -1;
        int rhs = -1;
    };

    struct Parser {
        std::string_view s;
        std::size_t pos;
        std::vector<Node> nodes;

        int add(Node n) {
            nodes.push_back(n);
            return static_cast<int>(nodes.size()) - 1;
        }
        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool eat(char c) {
            skip();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        int expr() {
            int lhs = term();
            for (;;) {
                if (eat('+')) lhs = add({Op::Add, 0.0, lhs, term()});
                else if (eat('-')) lhs = add({Op::Sub, 0.0, lhs, term()});
                else return lhs;
            }
        }
        int term() {
            int lhs = unary();
            for (;;) {
                if (eat('*')) lhs = add({Op::Mul, 0.0, lhs, unary()});
                else if (eat('/')) lhs = add({Op::Div, 0.0, lhs, unary()});
                else return lhs;
            }
        }
        int unary() {
            if (eat('-')) return add({Op::Neg, 0.0, unary(), -1});
            if (eat('+')) return unary();
            return power();
        }
        int power() {
            const int base = primary();
            if (eat('^')) return add({Op::Pow, 0.0, base, unary()});
            return base;
        }
        int primary() {
            skip();
            if (pos >= s.size()) throw ParseError("unexpected end of expression", pos);
            const char c = s[pos];
            if (c == '(') {
                ++pos;
                const int inner = expr();
                if (!eat(')')) throw ParseError("expected ')'", pos);
                return inner;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                const std::string rest(s.substr(pos));
                char* end = nullptr;
                const double v = std::strtod(rest.c_str(), &end);
                if (end == rest.c_str()) throw ParseError("malformed number", pos);
                pos += static_cast<std::size_t>(end - rest.c_str());
                return add({Op::Num, v});
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                const std::size_t start = pos;
                while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
                const std::string_view name = s.substr(start, pos - start);
                if (name == "t") return add({Op::T});
                if (name == "p1") return add({Op::P1});
                if (name == "p2") return add({Op::P2});
                Op f;
                if (name == "sin") f = Op::Sin;
                else if (name == "cos") f = Op::Cos;
                else if (name == "tan") f = Op::Tan;
                else if (name == "tanh") f = Op::Tanh;
                else if (name == "exp") f = Op::Exp;
                else if (name == "log") f = Op::Log;
                else if (name == "sqrt") f = Op::Sqrt;
                else if (name == "abs") f = Op::Abs;
                else throw ParseError("unknown identifier '" + std::string(name) + "'", start);
                if (!eat('(')) throw ParseError("expected '(' after " + std::string(name), pos);
                const int arg = expr();
                if (!eat(')')) throw ParseError("expected ')'", pos);
                return add({f, 0.0, arg, -1});
            }
            throw ParseError("unexpected '" + std::string(1, c) + "'", pos);
        }
    };

    [[nodiscard]] double eval(int i, double t, double p1, double p2) const {
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        auto l = [&] { return eval(n.lhs, t, p1, p2); };
        auto r = [&] { return eval(n.rhs, t, p1, p2); };
        switch (n.op) {
            case Op::Num: return n.value;
            case Op::T: return t;
            case Op::P1: return p1;
            case Op::P2: return p2;
            case Op::Add: return l() + r();
            case Op::Sub: return l() - r();
            case Op::Mul: return l() * r();
            case Op::Div: return l() / r();
            case Op::Pow: return std::pow(l(), r());
            case Op::Neg: return -l();
            case Op::Sin: return std::sin(l());
            case Op::Cos: return std::cos(l());
            case Op::Tan: return std::tan(l());
            case Op::Tanh: return std::tanh(l());
            case Op::Exp: return std::exp(l());
            case Op::Log: return std::log(l());
            case Op::Sqrt: return std::sqrt(l());
            case Op::Abs: return std::abs(l());
        }
        return 0.0;
    }

    std::vector<Node> nodes_;
    int root_ = -1;
    std::string text_;
};

}  // namespace memorybeam
