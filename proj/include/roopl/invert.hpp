#pragma once

#include "roopl/ast.hpp"

namespace roopl {

// Statement inverter I over the core language. Every rule is local:
//   skip            -> skip
//   s1 s2           -> I[s2] I[s1]
//   x += e          -> x -= e        (and vice versa; ^= is self-inverse)
//   x1 <=> x2       -> x1 <=> x2
//   call/uncall     -> uncall/call   (both local and object forms)
//   if e1 ... fi e2 -> if e2 then I[s1] else I[s2] fi e1
//   from e1 .. e2   -> from e2 do I[s1] loop I[s2] until e1
//   object block    -> object block with inverted body
//   local block     -> local block with initializer and delocal swapped
// The conditional and loop rules exchange the entry expression with the exit
// assertion: the assertion identifies the taken path, so it must act as the
// entry condition when running in reverse.

Statement invert_statement(const Statement& s);

inline StmtSeq invert_seq(const StmtSeq& seq) {
    StmtSeq out;
    out.reserve(seq.size());
    for (auto it = seq.rbegin(); it != seq.rend(); ++it)
        out.push_back(invert_statement(*it));
    return out;
}

inline Statement invert_statement(const Statement& s) {
    using S = Statement;
    if (auto* x = std::get_if<S::Assign>(&s.node)) {
        ModOp op = x->op;
        if (op == ModOp::Add)
            op = ModOp::Sub;
        else if (op == ModOp::Sub)
            op = ModOp::Add;
        return make_stmt(S::Assign{x->target, op, x->expr}, s.loc);
    }
    if (std::holds_alternative<S::Swap>(s.node) || std::holds_alternative<S::Skip>(s.node))
        return s;
    if (auto* x = std::get_if<S::If>(&s.node)) {
        S::If node;
        node.entry = x->exit;
        node.exit = x->entry;
        node.then_branch = invert_seq(x->then_branch);
        node.else_branch = invert_seq(x->else_branch);
        node.has_else = x->has_else;
        return make_stmt(std::move(node), s.loc);
    }
    if (auto* x = std::get_if<S::Loop>(&s.node)) {
        S::Loop node;
        node.entry = x->exit;
        node.exit = x->entry;
        node.do_body = invert_seq(x->do_body);
        node.loop_body = invert_seq(x->loop_body);
        node.has_do = x->has_do;
        node.has_loop = x->has_loop;
        return make_stmt(std::move(node), s.loc);
    }
    if (auto* x = std::get_if<S::ObjectBlock>(&s.node)) {
        S::ObjectBlock node;
        node.class_name = x->class_name;
        node.var = x->var;
        node.body = invert_seq(x->body);
        return make_stmt(std::move(node), s.loc);
    }
    if (auto* x = std::get_if<S::LocalBlock>(&s.node)) {
        S::LocalBlock node;
        node.decls.push_back({x->decls.front().name, x->exits.front().expr});
        node.exits.push_back({x->exits.front().name, x->decls.front().expr});
        node.body = invert_seq(x->body);
        return make_stmt(std::move(node), s.loc);
    }
    if (auto* x = std::get_if<S::Invocation>(&s.node)) {
        S::Invocation node = *x;
        node.is_uncall = !node.is_uncall;
        return make_stmt(std::move(node), s.loc);
    }
    return s;
}

// Modified inverter I': calls and uncalls stay fixed so the inversion of the
// method bodies is not cancelled out; everything else delegates to I.
inline Statement invert_statement_modified(const Statement& s);

inline StmtSeq invert_seq_modified(const StmtSeq& seq) {
    StmtSeq out;
    out.reserve(seq.size());
    for (auto it = seq.rbegin(); it != seq.rend(); ++it)
        out.push_back(invert_statement_modified(*it));
    return out;
}

inline Statement invert_statement_modified(const Statement& s) {
    using S = Statement;
    if (std::holds_alternative<S::Invocation>(s.node))
        return s;
    if (auto* x = std::get_if<S::If>(&s.node)) {
        S::If node;
        node.entry = x->exit;
        node.exit = x->entry;
        node.then_branch = invert_seq_modified(x->then_branch);
        node.else_branch = invert_seq_modified(x->else_branch);
        node.has_else = x->has_else;
        return make_stmt(std::move(node), s.loc);
    }
    if (auto* x = std::get_if<S::Loop>(&s.node)) {
        S::Loop node;
        node.entry = x->exit;
        node.exit = x->entry;
        node.do_body = invert_seq_modified(x->do_body);
        node.loop_body = invert_seq_modified(x->loop_body);
        node.has_do = x->has_do;
        node.has_loop = x->has_loop;
        return make_stmt(std::move(node), s.loc);
    }
    if (auto* x = std::get_if<S::ObjectBlock>(&s.node)) {
        S::ObjectBlock node;
        node.class_name = x->class_name;
        node.var = x->var;
        node.body = invert_seq_modified(x->body);
        return make_stmt(std::move(node), s.loc);
    }
    if (auto* x = std::get_if<S::LocalBlock>(&s.node)) {
        S::LocalBlock node;
        node.decls.push_back({x->decls.front().name, x->exits.front().expr});
        node.exits.push_back({x->exits.front().name, x->decls.front().expr});
        node.body = invert_seq_modified(x->body);
        return make_stmt(std::move(node), s.loc);
    }
    return invert_statement(s);
}

// I_c and I_prog: invert every method body with I'.
inline Program invert_program(const Program& prog) {
    Program out;
    for (const auto& cls : prog.classes) {
        ClassDecl c = cls;
        for (auto& m : c.methods)
            m.body = invert_seq_modified(m.body);
        out.classes.push_back(std::move(c));
    }
    return out;
}

} // namespace roopl
