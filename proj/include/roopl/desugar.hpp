#pragma once

#include <string>
#include <vector>

#include "roopl/ast.hpp"

namespace roopl {

// Expands the extension forms into the core language:
//   - short-form conditionals gain `else skip`
//   - short-form loops gain `do skip` / `loop skip`
//   - constructor blocks expand to an object block wrapping
//     call x::constructor(...) ... uncall x::constructor(...)
//   - expression arguments move into a local block with a fresh temporary
//   - `reversal q(args) s` expands to call q(args) s uncall q(args)
//   - multi-declarator local blocks nest, innermost declared last
// Core statements pass through unchanged, so desugaring is idempotent.
class Desugarer {
public:
    Program run(const Program& prog) {
        Program out;
        for (const auto& cls : prog.classes) {
            ClassDecl c = cls;
            c.methods.clear();
            for (const auto& m : cls.methods) {
                MethodDecl dm = m;
                dm.body = desugar_seq(m.body);
                c.methods.push_back(std::move(dm));
            }
            out.classes.push_back(std::move(c));
        }
        return out;
    }

private:
    int fresh_counter_ = 0;

    std::string fresh_name() { return "$tmp" + std::to_string(fresh_counter_++); }

    StmtSeq desugar_seq(const StmtSeq& seq) {
        StmtSeq out;
        for (const auto& s : seq)
            desugar_stmt(s, out);
        return out;
    }

    void desugar_stmt(const Statement& s, StmtSeq& out) {
        using S = Statement;
        if (auto* x = std::get_if<S::If>(&s.node)) {
            S::If node;
            node.entry = x->entry;
            node.exit = x->exit;
            node.then_branch = desugar_seq(x->then_branch);
            node.else_branch = x->has_else ? desugar_seq(x->else_branch)
                                           : StmtSeq{make_stmt(S::Skip{}, s.loc)};
            node.has_else = true;
            out.push_back(make_stmt(std::move(node), s.loc));
            return;
        }
        if (auto* x = std::get_if<S::Loop>(&s.node)) {
            S::Loop node;
            node.entry = x->entry;
            node.exit = x->exit;
            node.do_body = x->has_do ? desugar_seq(x->do_body)
                                     : StmtSeq{make_stmt(S::Skip{}, s.loc)};
            node.loop_body = x->has_loop ? desugar_seq(x->loop_body)
                                         : StmtSeq{make_stmt(S::Skip{}, s.loc)};
            node.has_do = true;
            node.has_loop = true;
            out.push_back(make_stmt(std::move(node), s.loc));
            return;
        }
        if (auto* x = std::get_if<S::ObjectBlock>(&s.node)) {
            S::ObjectBlock node;
            node.class_name = x->class_name;
            node.var = x->var;
            if (x->has_ctor) {
                S::Invocation ctor{false, x->var, "constructor", x->ctor_args};
                S::Invocation dtor{true, x->var, "constructor", x->dtor_args};
                StmtSeq body;
                desugar_stmt(make_stmt(std::move(ctor), s.loc), body);
                for (const auto& inner : desugar_seq(x->body))
                    body.push_back(inner);
                desugar_stmt(make_stmt(std::move(dtor), s.loc), body);
                node.body = std::move(body);
            } else {
                node.body = desugar_seq(x->body);
            }
            out.push_back(make_stmt(std::move(node), s.loc));
            return;
        }
        if (auto* x = std::get_if<S::LocalBlock>(&s.node)) {
            out.push_back(desugar_local(*x, 0, s.loc));
            return;
        }
        if (auto* x = std::get_if<S::Invocation>(&s.node)) {
            out.push_back(desugar_invocation(*x, s.loc));
            return;
        }
        if (auto* x = std::get_if<S::Reversal>(&s.node)) {
            S::Invocation call{false, std::nullopt, x->method, x->args};
            S::Invocation uncall{true, std::nullopt, x->method, x->args};
            desugar_stmt(make_stmt(std::move(call), s.loc), out);
            for (const auto& inner : desugar_seq(x->body))
                out.push_back(inner);
            desugar_stmt(make_stmt(std::move(uncall), s.loc), out);
            return;
        }
        out.push_back(s); // Assign, Swap, Skip
    }

    // Nest multi-declarator locals in declaration order, delocal in reverse.
    Statement desugar_local(const Statement::LocalBlock& block, std::size_t index, SourceLoc loc) {
        Statement::LocalBlock node;
        node.decls = {block.decls[index]};
        node.exits = {block.exits[index]};
        if (index + 1 < block.decls.size())
            node.body = {desugar_local(block, index + 1, loc)};
        else
            node.body = desugar_seq(block.body);
        return make_stmt(std::move(node), loc);
    }

    // call q(..., e, ...) == local int t = e  call q(..., t, ...)  delocal t = e
    Statement desugar_invocation(const Statement::Invocation& inv, SourceLoc loc) {
        Statement::Invocation core = inv;
        std::vector<std::pair<std::string, ExprPtr>> temps;
        for (auto& arg : core.args) {
            if (!as_variable(arg)) {
                std::string name = fresh_name();
                temps.emplace_back(name, arg);
                arg = make_var(name, arg->loc);
            }
        }
        Statement result = make_stmt(std::move(core), loc);
        for (auto it = temps.rbegin(); it != temps.rend(); ++it) {
            Statement::LocalBlock wrap;
            wrap.decls = {{it->first, it->second}};
            wrap.exits = {{it->first, it->second}};
            wrap.body = {std::move(result)};
            result = make_stmt(std::move(wrap), loc);
        }
        return result;
    }
};

inline Program desugar(const Program& prog) {
    return Desugarer().run(prog);
}

// True when a statement uses only core forms (what desugar() guarantees).
inline bool is_core_stmt(const Statement& s) {
    using S = Statement;
    bool core = true;
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, S::If>) {
                core = node.has_else;
                for (const auto& inner : node.then_branch)
                    core = core && is_core_stmt(inner);
                for (const auto& inner : node.else_branch)
                    core = core && is_core_stmt(inner);
            } else if constexpr (std::is_same_v<T, S::Loop>) {
                core = node.has_do && node.has_loop;
                for (const auto& inner : node.do_body)
                    core = core && is_core_stmt(inner);
                for (const auto& inner : node.loop_body)
                    core = core && is_core_stmt(inner);
            } else if constexpr (std::is_same_v<T, S::ObjectBlock>) {
                core = !node.has_ctor;
                for (const auto& inner : node.body)
                    core = core && is_core_stmt(inner);
            } else if constexpr (std::is_same_v<T, S::LocalBlock>) {
                core = node.decls.size() == 1 && node.exits.size() == 1;
                for (const auto& inner : node.body)
                    core = core && is_core_stmt(inner);
            } else if constexpr (std::is_same_v<T, S::Invocation>) {
                for (const auto& arg : node.args)
                    core = core && as_variable(arg) != nullptr;
            } else if constexpr (std::is_same_v<T, S::Reversal>) {
                core = false;
            }
        },
        s.node);
    return core;
}

inline bool is_core_program(const Program& prog) {
    for (const auto& cls : prog.classes)
        for (const auto& m : cls.methods)
            for (const auto& s : m.body)
                if (!is_core_stmt(s))
                    return false;
    return true;
}

} // namespace roopl
