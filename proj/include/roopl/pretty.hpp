#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>

#include "roopl/ast.hpp"
#include "roopl/token.hpp"

namespace roopl {

namespace detail {

inline int binop_prec(BinOp op) {
    switch (op) {
    case BinOp::LogOr: return 1;
    case BinOp::LogAnd: return 2;
    case BinOp::Eq:
    case BinOp::Ne:
    case BinOp::Lt:
    case BinOp::Gt:
    case BinOp::Le:
    case BinOp::Ge: return 3;
    case BinOp::BitOr:
    case BinOp::Xor:
    case BinOp::BitAnd: return 4;
    case BinOp::Add:
    case BinOp::Sub: return 5;
    case BinOp::Mul:
    case BinOp::Div:
    case BinOp::Mod: return 6;
    }
    return 0;
}

// Renames identifiers that cannot be written in source syntax (the `$tmp`
// temporaries introduced by desugaring) to fresh legal names on output.
class NameSanitizer {
public:
    void reserve(const std::string& name) { used_.insert(name); }

    std::string map(const std::string& name) {
        if (is_identifier(name))
            return name;
        auto it = renamed_.find(name);
        if (it != renamed_.end())
            return it->second;
        std::string fresh;
        do {
            fresh = "_t" + std::to_string(counter_++);
        } while (used_.count(fresh));
        used_.insert(fresh);
        renamed_.emplace(name, fresh);
        return fresh;
    }

private:
    std::set<std::string> used_;
    std::map<std::string, std::string> renamed_;
    int counter_ = 0;
};

class Printer {
public:
    explicit Printer(const Program& prog) {
        for (const auto& cls : prog.classes) {
            names_.reserve(cls.name);
            for (const auto& f : cls.fields)
                names_.reserve(f.name);
            for (const auto& m : cls.methods) {
                names_.reserve(m.name);
                for (const auto& p : m.params)
                    names_.reserve(p.name);
                reserve_names(m.body);
            }
        }
    }

    std::string print(const Program& prog) {
        for (std::size_t i = 0; i < prog.classes.size(); ++i) {
            if (i > 0)
                out_ << "\n";
            print_class(prog.classes[i]);
        }
        return out_.str();
    }

private:
    std::ostringstream out_;
    NameSanitizer names_;

    void reserve_expr(const ExprPtr& e) {
        for (const auto& name : vars(e))
            if (is_identifier(name))
                names_.reserve(name);
    }

    void reserve_names(const StmtSeq& seq) {
        for (const auto& s : seq) {
            std::visit(
                [&](const auto& node) {
                    using T = std::decay_t<decltype(node)>;
                    if constexpr (std::is_same_v<T, Statement::Assign>) {
                        names_.reserve(node.target);
                        reserve_expr(node.expr);
                    } else if constexpr (std::is_same_v<T, Statement::Swap>) {
                        names_.reserve(node.left);
                        names_.reserve(node.right);
                    } else if constexpr (std::is_same_v<T, Statement::If>) {
                        reserve_expr(node.entry);
                        reserve_expr(node.exit);
                        reserve_names(node.then_branch);
                        reserve_names(node.else_branch);
                    } else if constexpr (std::is_same_v<T, Statement::Loop>) {
                        reserve_expr(node.entry);
                        reserve_expr(node.exit);
                        reserve_names(node.do_body);
                        reserve_names(node.loop_body);
                    } else if constexpr (std::is_same_v<T, Statement::ObjectBlock>) {
                        names_.reserve(node.var);
                        for (const auto& a : node.ctor_args)
                            reserve_expr(a);
                        for (const auto& a : node.dtor_args)
                            reserve_expr(a);
                        reserve_names(node.body);
                    } else if constexpr (std::is_same_v<T, Statement::LocalBlock>) {
                        for (const auto& d : node.decls) {
                            if (is_identifier(d.name))
                                names_.reserve(d.name);
                            reserve_expr(d.expr);
                        }
                        for (const auto& d : node.exits)
                            reserve_expr(d.expr);
                        reserve_names(node.body);
                    } else if constexpr (std::is_same_v<T, Statement::Invocation>) {
                        if (node.callee)
                            names_.reserve(*node.callee);
                        for (const auto& a : node.args)
                            reserve_expr(a);
                    } else if constexpr (std::is_same_v<T, Statement::Reversal>) {
                        for (const auto& a : node.args)
                            reserve_expr(a);
                        reserve_names(node.body);
                    }
                },
                s.node);
        }
    }

    void indent(int depth) {
        for (int i = 0; i < depth; ++i)
            out_ << "    ";
    }

    void print_class(const ClassDecl& cls) {
        out_ << "class " << cls.name;
        if (cls.base)
            out_ << " inherits " << *cls.base;
        out_ << "\n";
        for (const auto& f : cls.fields) {
            indent(1);
            out_ << to_string(f.type) << " " << f.name << "\n";
        }
        for (const auto& m : cls.methods) {
            out_ << "\n";
            indent(1);
            out_ << "method " << m.name << "(";
            for (std::size_t i = 0; i < m.params.size(); ++i) {
                if (i > 0)
                    out_ << ", ";
                out_ << to_string(m.params[i].type) << " " << m.params[i].name;
            }
            out_ << ")\n";
            print_seq(m.body, 2);
        }
    }

    void print_seq(const StmtSeq& seq, int depth) {
        for (const auto& s : seq)
            print_stmt(s, depth);
    }

    std::string expr_str(const ExprPtr& e, int parent_prec = 0) {
        if (auto* c = std::get_if<Expression::Constant>(&e->node))
            return c->value >= 0 ? std::to_string(c->value)
                                 : "(0 - " + std::to_string(-static_cast<std::int64_t>(c->value)) + ")";
        if (auto* v = std::get_if<Expression::Variable>(&e->node))
            return names_.map(v->name);
        if (std::holds_alternative<Expression::Nil>(e->node))
            return "nil";
        const auto& b = std::get<Expression::Binary>(e->node);
        int prec = binop_prec(b.op);
        std::string s = expr_str(b.left, prec) + " " + to_string(b.op) + " " +
                        expr_str(b.right, prec + 1);
        if (prec < parent_prec)
            return "(" + s + ")";
        return s;
    }

    void print_args(const std::vector<ExprPtr>& args) {
        out_ << "(";
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (i > 0)
                out_ << ", ";
            out_ << expr_str(args[i]);
        }
        out_ << ")";
    }

    void print_stmt(const Statement& s, int depth) {
        using S = Statement;
        indent(depth);
        if (auto* x = std::get_if<S::Assign>(&s.node)) {
            out_ << names_.map(x->target) << " " << to_string(x->op) << " " << expr_str(x->expr)
                 << "\n";
        } else if (auto* x = std::get_if<S::Swap>(&s.node)) {
            out_ << names_.map(x->left) << " <=> " << names_.map(x->right) << "\n";
        } else if (auto* x = std::get_if<S::If>(&s.node)) {
            out_ << "if " << expr_str(x->entry) << " then\n";
            print_seq(x->then_branch, depth + 1);
            if (x->has_else) {
                indent(depth);
                out_ << "else\n";
                print_seq(x->else_branch, depth + 1);
            }
            indent(depth);
            out_ << "fi " << expr_str(x->exit) << "\n";
        } else if (auto* x = std::get_if<S::Loop>(&s.node)) {
            out_ << "from " << expr_str(x->entry) << "\n";
            if (x->has_do) {
                indent(depth);
                out_ << "do\n";
                print_seq(x->do_body, depth + 1);
            }
            if (x->has_loop) {
                indent(depth);
                out_ << "loop\n";
                print_seq(x->loop_body, depth + 1);
            }
            indent(depth);
            out_ << "until " << expr_str(x->exit) << "\n";
        } else if (auto* x = std::get_if<S::ObjectBlock>(&s.node)) {
            out_ << "construct " << x->class_name << " " << names_.map(x->var);
            if (x->has_ctor)
                print_args(x->ctor_args);
            out_ << "\n";
            print_seq(x->body, depth + 1);
            indent(depth);
            out_ << "destruct " << names_.map(x->var);
            if (x->has_ctor)
                print_args(x->dtor_args);
            out_ << "\n";
        } else if (auto* x = std::get_if<S::LocalBlock>(&s.node)) {
            out_ << "local int ";
            for (std::size_t i = 0; i < x->decls.size(); ++i) {
                if (i > 0)
                    out_ << ", ";
                out_ << names_.map(x->decls[i].name) << " = " << expr_str(x->decls[i].expr);
            }
            out_ << "\n";
            print_seq(x->body, depth + 1);
            indent(depth);
            out_ << "delocal ";
            for (std::size_t i = 0; i < x->exits.size(); ++i) {
                if (i > 0)
                    out_ << ", ";
                out_ << names_.map(x->exits[i].name) << " = " << expr_str(x->exits[i].expr);
            }
            out_ << "\n";
        } else if (auto* x = std::get_if<S::Invocation>(&s.node)) {
            out_ << (x->is_uncall ? "uncall " : "call ");
            if (x->callee)
                out_ << names_.map(*x->callee) << "::";
            out_ << x->method;
            print_args(x->args);
            out_ << "\n";
        } else if (std::holds_alternative<S::Skip>(s.node)) {
            out_ << "skip\n";
        } else if (auto* x = std::get_if<S::Reversal>(&s.node)) {
            out_ << "reversal " << x->method;
            print_args(x->args);
            out_ << "\n";
            print_seq(x->body, depth + 1);
        }
    }
};

} // namespace detail

inline std::string pretty_print(const Program& prog) {
    detail::Printer printer(prog);
    return printer.print(prog);
}

} // namespace roopl
