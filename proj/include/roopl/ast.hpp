#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "roopl/diag.hpp"

namespace roopl {

// ---------------------------------------------------------------------------
// Types

struct Type {
    enum class Kind { Int, Class, Nil };
    Kind kind = Kind::Int;
    std::string class_name; // only for Kind::Class

    static Type integer() { return {Kind::Int, {}}; }
    static Type cls(std::string name) { return {Kind::Class, std::move(name)}; }
    static Type nil() { return {Kind::Nil, {}}; }

    bool is_int() const { return kind == Kind::Int; }
    bool is_class() const { return kind == Kind::Class; }
    bool is_nil() const { return kind == Kind::Nil; }
    bool operator==(const Type&) const = default;
};

inline std::string to_string(const Type& t) {
    switch (t.kind) {
    case Type::Kind::Int: return "int";
    case Type::Kind::Class: return t.class_name;
    case Type::Kind::Nil: return "nil";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Expressions

enum class BinOp {
    Add, Sub, Xor, Mul, Div, Mod, BitAnd, BitOr,
    LogAnd, LogOr, Lt, Gt, Eq, Ne, Le, Ge,
};

inline const char* to_string(BinOp op) {
    switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Xor: return "^";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Mod: return "%";
    case BinOp::BitAnd: return "&";
    case BinOp::BitOr: return "|";
    case BinOp::LogAnd: return "&&";
    case BinOp::LogOr: return "||";
    case BinOp::Lt: return "<";
    case BinOp::Gt: return ">";
    case BinOp::Eq: return "=";
    case BinOp::Ne: return "!=";
    case BinOp::Le: return "<=";
    case BinOp::Ge: return ">=";
    }
    return "?";
}

struct Expression;
using ExprPtr = std::shared_ptr<const Expression>;

struct Expression {
    struct Constant { std::int32_t value; };
    struct Variable { std::string name; };
    struct Nil {};
    struct Binary { BinOp op; ExprPtr left, right; };

    std::variant<Constant, Variable, Nil, Binary> node;
    SourceLoc loc;
};

inline ExprPtr make_const(std::int32_t v, SourceLoc loc = {}) {
    return std::make_shared<Expression>(Expression{Expression::Constant{v}, loc});
}
inline ExprPtr make_var(std::string name, SourceLoc loc = {}) {
    return std::make_shared<Expression>(Expression{Expression::Variable{std::move(name)}, loc});
}
inline ExprPtr make_nil(SourceLoc loc = {}) {
    return std::make_shared<Expression>(Expression{Expression::Nil{}, loc});
}
inline ExprPtr make_binary(BinOp op, ExprPtr l, ExprPtr r, SourceLoc loc = {}) {
    return std::make_shared<Expression>(
        Expression{Expression::Binary{op, std::move(l), std::move(r)}, loc});
}

inline const Expression::Variable* as_variable(const ExprPtr& e) {
    return std::get_if<Expression::Variable>(&e->node);
}

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
    if (a == b)
        return true;
    if (!a || !b || a->node.index() != b->node.index())
        return false;
    if (auto* ca = std::get_if<Expression::Constant>(&a->node))
        return ca->value == std::get<Expression::Constant>(b->node).value;
    if (auto* va = std::get_if<Expression::Variable>(&a->node))
        return va->name == std::get<Expression::Variable>(b->node).name;
    if (std::holds_alternative<Expression::Nil>(a->node))
        return true;
    const auto& ba = std::get<Expression::Binary>(a->node);
    const auto& bb = std::get<Expression::Binary>(b->node);
    return ba.op == bb.op && expr_equal(ba.left, bb.left) && expr_equal(ba.right, bb.right);
}

// vars(e): identifiers occurring in an expression.
inline void collect_vars(const ExprPtr& e, std::set<std::string>& out) {
    if (auto* v = std::get_if<Expression::Variable>(&e->node)) {
        out.insert(v->name);
    } else if (auto* b = std::get_if<Expression::Binary>(&e->node)) {
        collect_vars(b->left, out);
        collect_vars(b->right, out);
    }
}

inline std::set<std::string> vars(const ExprPtr& e) {
    std::set<std::string> out;
    collect_vars(e, out);
    return out;
}

// ---------------------------------------------------------------------------
// Statements

enum class ModOp { Add, Sub, Xor };

inline const char* to_string(ModOp op) {
    switch (op) {
    case ModOp::Add: return "+=";
    case ModOp::Sub: return "-=";
    case ModOp::Xor: return "^=";
    }
    return "?";
}

struct Statement;
using StmtSeq = std::vector<Statement>;

struct LocalDecl {
    std::string name;
    ExprPtr expr;
};

struct Statement {
    struct Assign {
        std::string target;
        ModOp op;
        ExprPtr expr;
    };
    struct Swap {
        std::string left, right;
    };
    struct If {
        ExprPtr entry;
        StmtSeq then_branch;
        StmtSeq else_branch; // empty in the parsed short form
        ExprPtr exit;
        bool has_else = true;
    };
    struct Loop {
        ExprPtr entry;
        StmtSeq do_body;
        StmtSeq loop_body;
        ExprPtr exit;
        bool has_do = true;
        bool has_loop = true;
    };
    struct ObjectBlock {
        std::string class_name;
        std::string var;
        StmtSeq body;
        // Constructor sugar: construct c x(args) ... destruct x(args).
        bool has_ctor = false;
        std::vector<ExprPtr> ctor_args;
        std::vector<ExprPtr> dtor_args;
    };
    struct LocalBlock {
        // Multiple declarators pre-desugar; exactly one in the core form.
        std::vector<LocalDecl> decls;
        StmtSeq body;
        std::vector<LocalDecl> exits;
    };
    // call/uncall q(...) and call/uncall x::q(...). Argument expressions are
    // general pre-desugar; plain variables in the core form.
    struct Invocation {
        bool is_uncall = false;
        std::optional<std::string> callee; // nullopt for local invocations
        std::string method;
        std::vector<ExprPtr> args;
    };
    struct Skip {};
    // reversal q(args) s  ==  call q(args) s uncall q(args); sugar only.
    struct Reversal {
        std::string method;
        std::vector<ExprPtr> args;
        StmtSeq body; // exactly one statement
    };

    std::variant<Assign, Swap, If, Loop, ObjectBlock, LocalBlock, Invocation, Skip, Reversal>
        node;
    SourceLoc loc;
};

template <class Node>
Statement make_stmt(Node node, SourceLoc loc = {}) {
    return Statement{std::move(node), loc};
}

// ---------------------------------------------------------------------------
// Declarations

struct Field {
    Type type;
    std::string name;
    SourceLoc loc;
};

struct Param {
    Type type;
    std::string name;
    SourceLoc loc;
};

struct MethodDecl {
    std::string name;
    std::vector<Param> params;
    StmtSeq body;
    SourceLoc loc;
};

struct ClassDecl {
    std::string name;
    std::optional<std::string> base;
    std::vector<Field> fields;
    std::vector<MethodDecl> methods;
    SourceLoc loc;
};

struct Program {
    std::vector<ClassDecl> classes;
};

// ---------------------------------------------------------------------------
// Structural equality (source locations ignored)

bool stmt_equal(const Statement& a, const Statement& b);

inline bool seq_equal(const StmtSeq& a, const StmtSeq& b) {
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!stmt_equal(a[i], b[i]))
            return false;
    return true;
}

inline bool args_equal(const std::vector<ExprPtr>& a, const std::vector<ExprPtr>& b) {
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!expr_equal(a[i], b[i]))
            return false;
    return true;
}

inline bool decls_equal(const std::vector<LocalDecl>& a, const std::vector<LocalDecl>& b) {
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].name != b[i].name || !expr_equal(a[i].expr, b[i].expr))
            return false;
    return true;
}

inline bool stmt_equal(const Statement& a, const Statement& b) {
    if (a.node.index() != b.node.index())
        return false;
    using S = Statement;
    if (auto* x = std::get_if<S::Assign>(&a.node)) {
        const auto& y = std::get<S::Assign>(b.node);
        return x->target == y.target && x->op == y.op && expr_equal(x->expr, y.expr);
    }
    if (auto* x = std::get_if<S::Swap>(&a.node)) {
        const auto& y = std::get<S::Swap>(b.node);
        return x->left == y.left && x->right == y.right;
    }
    if (auto* x = std::get_if<S::If>(&a.node)) {
        const auto& y = std::get<S::If>(b.node);
        return expr_equal(x->entry, y.entry) && expr_equal(x->exit, y.exit) &&
               x->has_else == y.has_else && seq_equal(x->then_branch, y.then_branch) &&
               seq_equal(x->else_branch, y.else_branch);
    }
    if (auto* x = std::get_if<S::Loop>(&a.node)) {
        const auto& y = std::get<S::Loop>(b.node);
        return expr_equal(x->entry, y.entry) && expr_equal(x->exit, y.exit) &&
               x->has_do == y.has_do && x->has_loop == y.has_loop &&
               seq_equal(x->do_body, y.do_body) && seq_equal(x->loop_body, y.loop_body);
    }
    if (auto* x = std::get_if<S::ObjectBlock>(&a.node)) {
        const auto& y = std::get<S::ObjectBlock>(b.node);
        return x->class_name == y.class_name && x->var == y.var && x->has_ctor == y.has_ctor &&
               args_equal(x->ctor_args, y.ctor_args) && args_equal(x->dtor_args, y.dtor_args) &&
               seq_equal(x->body, y.body);
    }
    if (auto* x = std::get_if<S::LocalBlock>(&a.node)) {
        const auto& y = std::get<S::LocalBlock>(b.node);
        return decls_equal(x->decls, y.decls) && decls_equal(x->exits, y.exits) &&
               seq_equal(x->body, y.body);
    }
    if (auto* x = std::get_if<S::Invocation>(&a.node)) {
        const auto& y = std::get<S::Invocation>(b.node);
        return x->is_uncall == y.is_uncall && x->callee == y.callee && x->method == y.method &&
               args_equal(x->args, y.args);
    }
    if (std::holds_alternative<S::Skip>(a.node))
        return true;
    if (auto* x = std::get_if<S::Reversal>(&a.node)) {
        const auto& y = std::get<S::Reversal>(b.node);
        return x->method == y.method && args_equal(x->args, y.args) &&
               seq_equal(x->body, y.body);
    }
    return false;
}

inline bool method_equal(const MethodDecl& a, const MethodDecl& b) {
    if (a.name != b.name || a.params.size() != b.params.size())
        return false;
    for (std::size_t i = 0; i < a.params.size(); ++i)
        if (a.params[i].type != b.params[i].type || a.params[i].name != b.params[i].name)
            return false;
    return seq_equal(a.body, b.body);
}

inline bool class_equal(const ClassDecl& a, const ClassDecl& b) {
    if (a.name != b.name || a.base != b.base || a.fields.size() != b.fields.size() ||
        a.methods.size() != b.methods.size())
        return false;
    for (std::size_t i = 0; i < a.fields.size(); ++i)
        if (a.fields[i].type != b.fields[i].type || a.fields[i].name != b.fields[i].name)
            return false;
    for (std::size_t i = 0; i < a.methods.size(); ++i)
        if (!method_equal(a.methods[i], b.methods[i]))
            return false;
    return true;
}

inline bool program_equal(const Program& a, const Program& b) {
    if (a.classes.size() != b.classes.size())
        return false;
    for (std::size_t i = 0; i < a.classes.size(); ++i)
        if (!class_equal(a.classes[i], b.classes[i]))
            return false;
    return true;
}

// Node counts, used by the size-preservation checks.
inline std::size_t expr_size(const ExprPtr& e) {
    if (auto* b = std::get_if<Expression::Binary>(&e->node))
        return 1 + expr_size(b->left) + expr_size(b->right);
    return 1;
}

std::size_t stmt_size(const Statement& s);

inline std::size_t seq_size(const StmtSeq& seq) {
    std::size_t n = 0;
    for (const auto& s : seq)
        n += stmt_size(s);
    return n;
}

inline std::size_t stmt_size(const Statement& s) {
    using S = Statement;
    if (auto* x = std::get_if<S::Assign>(&s.node))
        return 1 + expr_size(x->expr);
    if (std::holds_alternative<S::Swap>(s.node))
        return 1;
    if (auto* x = std::get_if<S::If>(&s.node))
        return 1 + expr_size(x->entry) + expr_size(x->exit) + seq_size(x->then_branch) +
               seq_size(x->else_branch);
    if (auto* x = std::get_if<S::Loop>(&s.node))
        return 1 + expr_size(x->entry) + expr_size(x->exit) + seq_size(x->do_body) +
               seq_size(x->loop_body);
    if (auto* x = std::get_if<S::ObjectBlock>(&s.node))
        return 1 + seq_size(x->body);
    if (auto* x = std::get_if<S::LocalBlock>(&s.node)) {
        std::size_t n = 1 + seq_size(x->body);
        for (const auto& d : x->decls)
            n += expr_size(d.expr);
        for (const auto& d : x->exits)
            n += expr_size(d.expr);
        return n;
    }
    if (auto* x = std::get_if<S::Invocation>(&s.node)) {
        std::size_t n = 1;
        for (const auto& a : x->args)
            n += expr_size(a);
        return n;
    }
    if (auto* x = std::get_if<S::Reversal>(&s.node))
        return 1 + seq_size(x->body);
    return 1; // Skip
}

} // namespace roopl
