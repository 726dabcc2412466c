#pragma once

#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lvlset/error.hpp"

namespace lvlset {

/**
 * @brief Small arithmetic expression: + - * / ^, sin cos exp log abs sqrt, pi.
 *
 * Variables are bound by position to the names given at parse time.
 * derivative() returns an unsimplified expression tree.
 */
class Expr {
  public:
    Expr() = default;

    static Expr parse(const std::string& text, const std::vector<std::string>& vars) {
        Parser p{text, vars, 0};
        Expr e;
        e.root_ = p.parse_sum();
        p.skip_ws();
        if (p.pos != text.size())
            throw ConfigError("expression '" + text + "': unexpected '" + text.substr(p.pos) + "'");
        e.nvars_ = vars.size();
        e.text_ = text;
        return e;
    }

    double operator()(std::span<const double> v) const {
        if (v.size() < nvars_) throw ConfigError("expression '" + text_ + "': too few variables");
        return eval(*root_, v);
    }

    Expr derivative(std::size_t var) const {
        Expr e;
        e.root_ = diff(root_, var);
        e.nvars_ = nvars_;
        e.text_ = "d/dv" + std::to_string(var) + "(" + text_ + ")";
        return e;
    }

    const std::string& text() const { return text_; }
    bool valid() const { return root_ != nullptr; }

  private:
    enum class Op { num, var, add, sub, mul, div, pow, neg, sin, cos, exp, log, abs, sqrt, sign };
    struct Node {
        Op op;
        double value = 0.0;
        std::size_t var = 0;
        std::shared_ptr<const Node> a, b;
    };
    using P = std::shared_ptr<const Node>;

    static P num(double v) { return std::make_shared<Node>(Node{Op::num, v, 0, nullptr, nullptr}); }
    static P un(Op op, P a) { return std::make_shared<Node>(Node{op, 0.0, 0, std::move(a), nullptr}); }
    static P bin(Op op, P a, P b) {
        return std::make_shared<Node>(Node{op, 0.0, 0, std::move(a), std::move(b)});
    }

    struct Parser {
        const std::string& s;
        const std::vector<std::string>& vars;
        std::size_t pos;

        void skip_ws() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool eat(char c) {
            skip_ws();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        [[noreturn]] void fail(const std::string& what) {
            throw ConfigError("expression '" + s + "': " + what + " at position " + std::to_string(pos));
        }
        P parse_sum() {
            P lhs = parse_product();
            for (;;) {
                if (eat('+')) lhs = bin(Op::add, lhs, parse_product());
                else if (eat('-')) lhs = bin(Op::sub, lhs, parse_product());
                else return lhs;
            }
        }
        P parse_product() {
            P lhs = parse_unary();
            for (;;) {
                if (eat('*')) lhs = bin(Op::mul, lhs, parse_unary());
                else if (eat('/')) lhs = bin(Op::div, lhs, parse_unary());
                else return lhs;
            }
        }
        P parse_unary() {
            if (eat('-')) return un(Op::neg, parse_unary());
            if (eat('+')) return parse_unary();
            return parse_power();
        }
        P parse_power() {
            P base = parse_atom();
            if (eat('^')) return bin(Op::pow, base, parse_unary());
            return base;
        }
        P parse_atom() {
            skip_ws();
            if (pos >= s.size()) fail("unexpected end");
            char c = s[pos];
            if (c == '(') {
                ++pos;
                P e = parse_sum();
                if (!eat(')')) fail("missing ')'");
                return e;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                std::size_t used = 0;
                double v = std::stod(s.substr(pos), &used);
                pos += used;
                return num(v);
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t start = pos;
                while (pos < s.size() &&
                       (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
                    ++pos;
                std::string name = s.substr(start, pos - start);
                static const std::pair<const char*, Op> fns[] = {{"sin", Op::sin},   {"cos", Op::cos},
                                                                 {"exp", Op::exp},   {"log", Op::log},
                                                                 {"abs", Op::abs},   {"sqrt", Op::sqrt}};
                for (auto& [fn, op] : fns) {
                    if (name == fn) {
                        if (!eat('(')) fail("expected '(' after " + name);
                        P arg = parse_sum();
                        if (!eat(')')) fail("missing ')'");
                        return un(op, arg);
                    }
                }
                if (name == "pi") return num(std::numbers::pi);
                for (std::size_t i = 0; i < vars.size(); ++i)
                    if (vars[i] == name)
                        return std::make_shared<Node>(Node{Op::var, 0.0, i, nullptr, nullptr});
                fail("unknown name '" + name + "'");
            }
            fail(std::string("unexpected '") + c + "'");
        }
    };

    static double eval(const Node& n, std::span<const double> v) {
        switch (n.op) {
            case Op::num: return n.value;
            case Op::var: return v[n.var];
            case Op::add: return eval(*n.a, v) + eval(*n.b, v);
            case Op::sub: return eval(*n.a, v) - eval(*n.b, v);
            case Op::mul: return eval(*n.a, v) * eval(*n.b, v);
            case Op::div: return eval(*n.a, v) / eval(*n.b, v);
            case Op::pow: return std::pow(eval(*n.a, v), eval(*n.b, v));
            case Op::neg: return -eval(*n.a, v);
            case Op::sin: return std::sin(eval(*n.a, v));
            case Op::cos: return std::cos(eval(*n.a, v));
            case Op::exp: return std::exp(eval(*n.a, v));
            case Op::log: return std::log(eval(*n.a, v));
            case Op::abs: return std::abs(eval(*n.a, v));
            case Op::sqrt: return std::sqrt(eval(*n.a, v));
            case Op::sign: {
                double x = eval(*n.a, v);
                return (x > 0.0) - (x < 0.0);
            }
        }
        return 0.0;
    }

    static P diff(const P& n, std::size_t k) {
        switch (n->op) {
            case Op::num: return num(0.0);
            case Op::var: return num(n->var == k ? 1.0 : 0.0);
            case Op::add: return bin(Op::add, diff(n->a, k), diff(n->b, k));
            case Op::sub: return bin(Op::sub, diff(n->a, k), diff(n->b, k));
            case Op::mul:
                return bin(Op::add, bin(Op::mul, diff(n->a, k), n->b), bin(Op::mul, n->a, diff(n->b, k)));
            case Op::div:
                return bin(Op::div,
                           bin(Op::sub, bin(Op::mul, diff(n->a, k), n->b), bin(Op::mul, n->a, diff(n->b, k))),
                           bin(Op::mul, n->b, n->b));
            case Op::pow:
                if (n->b->op == Op::num) {
                    double e = n->b->value;
                    return bin(Op::mul, bin(Op::mul, num(e), bin(Op::pow, n->a, num(e - 1.0))), diff(n->a, k));
                }
                return bin(Op::mul, n,
                           bin(Op::add, bin(Op::mul, diff(n->b, k), un(Op::log, n->a)),
                               bin(Op::div, bin(Op::mul, n->b, diff(n->a, k)), n->a)));
            case Op::neg: return un(Op::neg, diff(n->a, k));
            case Op::sin: return bin(Op::mul, un(Op::cos, n->a), diff(n->a, k));
            case Op::cos: return bin(Op::mul, un(Op::neg, un(Op::sin, n->a)), diff(n->a, k));
            case Op::exp: return bin(Op::mul, n, diff(n->a, k));
            case Op::log: return bin(Op::div, diff(n->a, k), n->a);
            case Op::abs: return bin(Op::mul, un(Op::sign, n->a), diff(n->a, k));
            case Op::sqrt: return bin(Op::div, diff(n->a, k), bin(Op::mul, num(2.0), n));
            case Op::sign: return num(0.0);
        }
        return num(0.0);
    }

    P root_;
    std::size_t nvars_ = 0;
    std::string text_;
};

}  // namespace lvlset
