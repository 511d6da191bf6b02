#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "roopl/ast.hpp"
#include "roopl/class_model.hpp"
#include "roopl/desugar.hpp"

namespace roopl {

// Pi: finite map from identifiers to types, with shadowing update.
class TypeEnv {
public:
    TypeEnv() = default;

    const Type* lookup(const std::string& name) const {
        auto it = map_.find(name);
        return it == map_.end() ? nullptr : &it->second;
    }

    TypeEnv bind(const std::string& name, Type type) const {
        TypeEnv out = *this;
        out.map_[name] = std::move(type);
        return out;
    }

    void bind_in_place(const std::string& name, Type type) { map_[name] = std::move(type); }

private:
    std::map<std::string, Type> map_;
};

namespace detail {

class TypeChecker {
public:
    TypeChecker(const ClassModel& model, std::vector<Diagnostic>& diags)
        : model_(model), diags_(diags) {}

    // Expression typing. Returns nullopt after reporting a diagnostic.
    std::optional<Type> type_of_expression(const TypeEnv& env, const ExprPtr& e) {
        if (std::holds_alternative<Expression::Constant>(e->node))
            return Type::integer(); // T-Con
        if (std::holds_alternative<Expression::Nil>(e->node))
            return Type::nil(); // T-Nil: any non-int type
        if (auto* v = std::get_if<Expression::Variable>(&e->node)) {
            if (const Type* t = env.lookup(v->name))
                return *t; // T-Var
            error(e->loc, "UnboundVariable", "unbound variable '" + v->name + "'");
            return std::nullopt;
        }
        const auto& b = std::get<Expression::Binary>(e->node);
        auto lt = type_of_expression(env, b.left);
        auto rt = type_of_expression(env, b.right);
        if (!lt || !rt)
            return std::nullopt;
        if (b.op == BinOp::Eq || b.op == BinOp::Ne) {
            // T-BinOpInt or T-BinOpObj: operands of one identical type.
            if (lt->is_int() && rt->is_int())
                return Type::integer();
            if (lt->is_int() || rt->is_int()) {
                error(e->loc, "TypeMismatch",
                      "cannot compare '" + to_string(*lt) + "' with '" + to_string(*rt) + "'");
                return std::nullopt;
            }
            if (lt->is_nil() || rt->is_nil() || *lt == *rt)
                return Type::integer();
            error(e->loc, "TypeMismatch",
                  "cannot compare distinct class types '" + to_string(*lt) + "' and '" +
                      to_string(*rt) + "'");
            return std::nullopt;
        }
        // T-BinOpInt: every other operator requires integer operands.
        for (const auto* t : {&*lt, &*rt}) {
            if (t->is_nil()) {
                error(e->loc, "NilInArithmetic",
                      std::string("'nil' cannot be an operand of '") + to_string(b.op) + "'");
                return std::nullopt;
            }
            if (t->is_class()) {
                error(e->loc, "TypeMismatch", "operator '" + std::string(to_string(b.op)) +
                                                  "' requires integer operands, got '" +
                                                  to_string(*t) + "'");
                return std::nullopt;
            }
        }
        return Type::integer();
    }

    void expect_int(const TypeEnv& env, const ExprPtr& e, const char* rule, const char* what) {
        auto t = type_of_expression(env, e);
        if (t && !t->is_int())
            error(e->loc, rule, std::string(what) + " must have type int, got '" + to_string(*t) +
                                    "'");
    }

    // Statement typing within class `cls`, fields in scope via `env`.
    void check_statement(const TypeEnv& env, const std::string& cls, const Statement& s) {
        using S = Statement;
        if (auto* x = std::get_if<S::Assign>(&s.node)) {
            const Type* t = env.lookup(x->target);
            if (!t) {
                error(s.loc, "UnboundVariable", "unbound variable '" + x->target + "'");
            } else if (!t->is_int()) {
                error(s.loc, "T-AssVar",
                      "assignment target '" + x->target + "' must have type int");
            }
            if (vars(x->expr).count(x->target))
                error(s.loc, "T-AssVar", "variable '" + x->target +
                                             "' may not occur in its own update expression");
            expect_int(env, x->expr, "T-AssVar", "update expression");
            return;
        }
        if (auto* x = std::get_if<S::Swap>(&s.node)) {
            const Type* lt = env.lookup(x->left);
            const Type* rt = env.lookup(x->right);
            if (!lt)
                error(s.loc, "UnboundVariable", "unbound variable '" + x->left + "'");
            if (!rt)
                error(s.loc, "UnboundVariable", "unbound variable '" + x->right + "'");
            if (lt && rt && !(*lt == *rt))
                error(s.loc, "T-SwpVar", "cannot swap '" + x->left + "' of type '" +
                                             to_string(*lt) + "' with '" + x->right +
                                             "' of type '" + to_string(*rt) + "'");
            return;
        }
        if (auto* x = std::get_if<S::If>(&s.node)) {
            expect_int(env, x->entry, "T-If", "entry condition");
            for (const auto& inner : x->then_branch)
                check_statement(env, cls, inner);
            for (const auto& inner : x->else_branch)
                check_statement(env, cls, inner);
            expect_int(env, x->exit, "T-If", "exit assertion");
            return;
        }
        if (auto* x = std::get_if<S::Loop>(&s.node)) {
            expect_int(env, x->entry, "T-Loop", "entry assertion");
            for (const auto& inner : x->do_body)
                check_statement(env, cls, inner);
            for (const auto& inner : x->loop_body)
                check_statement(env, cls, inner);
            expect_int(env, x->exit, "T-Loop", "exit condition");
            return;
        }
        if (auto* x = std::get_if<S::ObjectBlock>(&s.node)) {
            if (!model_.has_class(x->class_name)) {
                error(s.loc, "UnknownClass",
                      "construct of unknown class '" + x->class_name + "'");
                return;
            }
            TypeEnv inner = env.bind(x->var, Type::cls(x->class_name)); // T-ObjBlock
            for (const auto& stmt : x->body)
                check_statement(inner, cls, stmt);
            return;
        }
        if (auto* x = std::get_if<S::LocalBlock>(&s.node)) {
            // Extension form; premises mirror T-AssVar so the block variable
            // cannot feed its own initialization or delocal expression.
            const auto& decl = x->decls.front();
            const auto& exit = x->exits.front();
            if (vars(decl.expr).count(decl.name))
                error(s.loc, "T-LocalBlock", "variable '" + decl.name +
                                                 "' may not occur in its own initializer");
            expect_int(env, decl.expr, "T-LocalBlock", "local initializer");
            TypeEnv inner = env.bind(decl.name, Type::integer());
            for (const auto& stmt : x->body)
                check_statement(inner, cls, stmt);
            if (vars(exit.expr).count(exit.name))
                error(s.loc, "T-LocalBlock", "variable '" + exit.name +
                                                 "' may not occur in its own delocal expression");
            expect_int(env, exit.expr, "T-LocalBlock", "delocal expression");
            return;
        }
        if (auto* x = std::get_if<S::Invocation>(&s.node)) {
            check_invocation(env, cls, *x, s.loc);
            return;
        }
        if (std::holds_alternative<S::Reversal>(s.node)) {
            error(s.loc, "Internal", "reversal statement survived desugaring");
            return;
        }
        // T-Skip
    }

    void check_invocation(const TypeEnv& env, const std::string& cls, const Statement::Invocation& inv,
                          SourceLoc loc) {
        const char* rule = inv.callee ? (inv.is_uncall ? "T-UCO" : "T-CallO")
                                      : (inv.is_uncall ? "T-UC" : "T-Call");

        // Arguments are plain variables in the core language.
        std::vector<std::string> args;
        for (const auto& a : inv.args) {
            const auto* v = as_variable(a);
            if (!v) {
                error(loc, "Internal", "expression argument survived desugaring");
                return;
            }
            args.push_back(v->name);
        }

        std::string target_class;
        if (inv.callee) {
            const Type* ct = env.lookup(*inv.callee);
            if (!ct) {
                error(loc, "UnboundVariable", "unbound variable '" + *inv.callee + "'");
                return;
            }
            if (!ct->is_class()) {
                error(loc, rule, "callee '" + *inv.callee + "' must be an object reference");
                return;
            }
            target_class = ct->class_name;
        } else {
            target_class = cls;
        }

        const ResolvedMethod* method = model_.find_method(target_class, inv.method);
        if (!method) {
            error(loc, rule,
                  "class '" + target_class + "' has no method '" + inv.method + "'");
            return;
        }
        const auto& params = method->decl->params;
        if (params.size() != args.size()) {
            error(loc, rule, "method '" + inv.method + "' expects " +
                                 std::to_string(params.size()) + " argument(s), got " +
                                 std::to_string(args.size()));
            return;
        }

        // i != j ==> x_i != x_j
        std::set<std::string> seen;
        for (const auto& a : args)
            if (!seen.insert(a).second)
                error(loc, rule, "duplicate argument '" + a + "'");

        if (inv.callee) {
            // x_0 itself may not be passed along (self-aliasing).
            for (const auto& a : args)
                if (a == *inv.callee)
                    error(loc, rule,
                          "callee '" + *inv.callee + "' may not also be an argument");
        } else {
            // No class fields as arguments to local methods.
            const ClassInfo& info = model_.info(cls);
            std::set<std::string> fields;
            for (const auto& f : info.resolved_fields)
                fields.insert(f.name);
            for (const auto& a : args)
                if (fields.count(a))
                    error(loc, rule,
                          "field '" + a + "' may not be an argument of a local call");
        }

        // Pi(x_i) <: t_i
        for (std::size_t i = 0; i < args.size(); ++i) {
            const Type* at = env.lookup(args[i]);
            if (!at) {
                error(loc, "UnboundVariable", "unbound variable '" + args[i] + "'");
                continue;
            }
            if (!model_.subtype(*at, params[i].type))
                error(loc, rule, "argument '" + args[i] + "' of type '" + to_string(*at) +
                                     "' is not a subtype of parameter type '" +
                                     to_string(params[i].type) + "'");
        }
    }

    // Methods are checked under their declaring class with fields
    // and parameters bound in the environment.
    void check_program(const Program& prog) {
        for (const auto& cls : prog.classes) {
            if (!model_.has_class(cls.name))
                continue;
            const ClassInfo& info = model_.info(cls.name);
            TypeEnv fields;
            for (const auto& f : info.resolved_fields)
                fields.bind_in_place(f.name, f.type);
            for (const auto& m : cls.methods) {
                TypeEnv env = fields;
                for (const auto& p : m.params)
                    env.bind_in_place(p.name, p.type);
                for (const auto& s : m.body)
                    check_statement(env, cls.name, s);
            }
        }
    }

private:
    const ClassModel& model_;
    std::vector<Diagnostic>& diags_;

    void error(SourceLoc loc, const char* rule, std::string message) {
        diags_.push_back({loc, rule, std::move(message)});
    }
};

} // namespace detail

inline std::optional<Type> type_of_expression(const ClassModel& model, const TypeEnv& env,
                                              const ExprPtr& e,
                                              std::vector<Diagnostic>& diags) {
    return detail::TypeChecker(model, diags).type_of_expression(env, e);
}

inline void check_statement(const ClassModel& model, const TypeEnv& env, const std::string& cls,
                            const Statement& s, std::vector<Diagnostic>& diags) {
    detail::TypeChecker(model, diags).check_statement(env, cls, s);
}

// Checks a desugared program against an already-built class model.
inline std::vector<Diagnostic> check_program(const ClassModel& model, const Program& prog) {
    std::vector<Diagnostic> diags;
    detail::TypeChecker(model, diags).check_program(prog);
    return diags;
}

} // namespace roopl
