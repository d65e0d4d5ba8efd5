#pragma once

#include <cmath>
#include <vector>

#include "expr.hpp"

namespace diffsym {

// Flat postfix program for fast repeated evaluation on a fixed slot layout.
// Semantics match eval(): same domain errors, doubles throughout.
class CompiledExpr {
    enum class I : unsigned char { Const, Load, Add, Mul, PowI, PowR, Exp, Log, Sin, Cos };
    struct Instr {
        I op;
        int a = 0;
        double c = 0;
    };

public:
    CompiledExpr() = default;

    CompiledExpr(const Expr& e, const std::vector<std::string>& slots) {
        int depth = compile(e, slots);
        stack_.resize(static_cast<std::size_t>(depth));
    }

    double operator()(const double* args) {
        std::size_t sp = 0;
        for (const Instr& in : prog_) {
            switch (in.op) {
                case I::Const: stack_[sp++] = in.c; break;
                case I::Load: stack_[sp++] = args[in.a]; break;
                case I::Add: --sp; stack_[sp - 1] += stack_[sp]; break;
                case I::Mul: --sp; stack_[sp - 1] *= stack_[sp]; break;
                case I::PowI: {
                    double b = stack_[sp - 1];
                    int n = in.a;
                    if (b == 0 && n < 0) throw EvaluationDomainError("division by zero");
                    double r = 1, base = n < 0 ? 1.0 / b : b;
                    for (int k = n < 0 ? -n : n; k; k >>= 1) {
                        if (k & 1) r *= base;
                        base *= base;
                    }
                    stack_[sp - 1] = r;
                    break;
                }
                case I::PowR: {
                    double b = stack_[sp - 1];
                    if (b < 0)
                        throw EvaluationDomainError("fractional power of a negative base");
                    if (b == 0 && in.c < 0) throw EvaluationDomainError("division by zero");
                    stack_[sp - 1] = std::pow(b, in.c);
                    break;
                }
                case I::Exp: stack_[sp - 1] = std::exp(stack_[sp - 1]); break;
                case I::Log:
                    if (stack_[sp - 1] <= 0)
                        throw EvaluationDomainError("log of a nonpositive number");
                    stack_[sp - 1] = std::log(stack_[sp - 1]);
                    break;
                case I::Sin: stack_[sp - 1] = std::sin(stack_[sp - 1]); break;
                case I::Cos: stack_[sp - 1] = std::cos(stack_[sp - 1]); break;
            }
        }
        return stack_[0];
    }

    double operator()(const std::vector<double>& args) { return (*this)(args.data()); }

private:
    // returns the stack depth needed by this subtree
    int compile(const Expr& e, const std::vector<std::string>& slots) {
        switch (e.op()) {
            case Op::Constant:
                prog_.push_back({I::Const, 0, to_double(e.value())});
                return 1;
            case Op::Variable: {
                for (std::size_t i = 0; i < slots.size(); ++i)
                    if (slots[i] == e.name()) {
                        prog_.push_back({I::Load, static_cast<int>(i), 0});
                        return 1;
                    }
                throw UnknownVariable(e.name());
            }
            case Op::Sum:
            case Op::Product: {
                I op = e.op() == Op::Sum ? I::Add : I::Mul;
                int depth = 0;
                for (std::size_t i = 0; i < e.children().size(); ++i) {
                    int d = compile(e.children()[i], slots);
                    depth = std::max(depth, (i > 0 ? 1 : 0) + d);
                    if (i > 0) prog_.push_back({op, 0, 0});
                }
                return std::max(depth, 1);
            }
            case Op::Power: {
                int d = compile(e.child(), slots);
                const Rational& q = e.value();
                if (is_integer(q) && num(q) >= -64 && num(q) <= 64)
                    prog_.push_back({I::PowI, static_cast<int>(to_long(num(q))), 0});
                else
                    prog_.push_back({I::PowR, 0, to_double(q)});
                return d;
            }
            case Op::Exp: { int d = compile(e.child(), slots); prog_.push_back({I::Exp, 0, 0}); return d; }
            case Op::Log: { int d = compile(e.child(), slots); prog_.push_back({I::Log, 0, 0}); return d; }
            case Op::Sin: { int d = compile(e.child(), slots); prog_.push_back({I::Sin, 0, 0}); return d; }
            case Op::Cos: { int d = compile(e.child(), slots); prog_.push_back({I::Cos, 0, 0}); return d; }
        }
        throw Error("unreachable");
    }

    std::vector<Instr> prog_;
    std::vector<double> stack_;
};

}  // namespace diffsym
