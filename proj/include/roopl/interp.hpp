#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "roopl/ast.hpp"
#include "roopl/class_model.hpp"
#include "roopl/invert.hpp"

namespace roopl {

using Location = std::int64_t; // 0 is reserved for nil and never allocated

struct RuntimeError : std::runtime_error {
    enum class Kind {
        AssertionIf,
        AssertionLoop,
        NonZeroFieldsAtDestruct,
        ReferenceNotRestored,
        DelocalMismatch,
        NilDereference,
        DivisionByZero,
        StackOverflow,
        Internal,
    };
    Kind kind;
    SourceLoc loc;
    RuntimeError(Kind k, SourceLoc l, const std::string& msg)
        : std::runtime_error(msg), kind(k), loc(l) {}
};

struct LocVal {
    Location addr = 0;
    bool operator==(const LocVal&) const = default;
};

struct ObjVal {
    std::string class_name;
    std::map<std::string, Location> fields; // gamma_f
    bool operator==(const ObjVal&) const = default;
};

struct Value {
    std::variant<std::int32_t, LocVal, ObjVal> v;

    Value() : v(std::int32_t{0}) {}
    Value(std::int32_t i) : v(i) {}
    Value(LocVal l) : v(l) {}
    Value(ObjVal o) : v(std::move(o)) {}

    bool is_int() const { return std::holds_alternative<std::int32_t>(v); }
    bool is_loc() const { return std::holds_alternative<LocVal>(v); }
    bool is_obj() const { return std::holds_alternative<ObjVal>(v); }
    std::int32_t as_int() const { return std::get<std::int32_t>(v); }
    Location as_loc() const { return std::get<LocVal>(v).addr; }
    const ObjVal& as_obj() const { return std::get<ObjVal>(v); }

    // Numeric view used by = and != (nil is 0, references are locations).
    std::int64_t as_number() const {
        if (is_int())
            return as_int();
        if (is_loc())
            return as_loc();
        throw RuntimeError(RuntimeError::Kind::Internal, {}, "object value used as a number");
    }

    bool operator==(const Value&) const = default;
};

using Env = std::map<std::string, Location>;
using Store = std::map<Location, Value>;

// [[op]] from the operator table; arithmetic wraps to 32 bits.
inline std::int32_t apply_binop(BinOp op, std::int32_t a, std::int32_t b, SourceLoc loc = {}) {
    auto ua = static_cast<std::uint32_t>(a);
    auto ub = static_cast<std::uint32_t>(b);
    switch (op) {
    case BinOp::Add: return static_cast<std::int32_t>(ua + ub);
    case BinOp::Sub: return static_cast<std::int32_t>(ua - ub);
    case BinOp::Mul: return static_cast<std::int32_t>(ua * ub);
    case BinOp::Div:
        if (b == 0)
            throw RuntimeError(RuntimeError::Kind::DivisionByZero, loc, "division by zero");
        return static_cast<std::int32_t>(static_cast<std::uint32_t>(
            static_cast<std::int64_t>(a) / static_cast<std::int64_t>(b)));
    case BinOp::Mod:
        if (b == 0)
            throw RuntimeError(RuntimeError::Kind::DivisionByZero, loc, "modulo by zero");
        return static_cast<std::int32_t>(static_cast<std::int64_t>(a) %
                                         static_cast<std::int64_t>(b));
    case BinOp::Xor: return static_cast<std::int32_t>(ua ^ ub);
    case BinOp::BitAnd: return static_cast<std::int32_t>(ua & ub);
    case BinOp::BitOr: return static_cast<std::int32_t>(ua | ub);
    case BinOp::LogAnd: return (a != 0 && b != 0) ? 1 : 0;
    case BinOp::LogOr: return (a != 0 || b != 0) ? 1 : 0;
    case BinOp::Lt: return a < b ? 1 : 0;
    case BinOp::Gt: return a > b ? 1 : 0;
    case BinOp::Le: return a <= b ? 1 : 0;
    case BinOp::Ge: return a >= b ? 1 : 0;
    case BinOp::Eq: return a == b ? 1 : 0;
    case BinOp::Ne: return a != b ? 1 : 0;
    }
    throw RuntimeError(RuntimeError::Kind::Internal, loc, "unknown operator");
}

struct InterpreterOptions {
    long long max_call_depth = 1'000'000;
    bool trace = false;
    std::ostream* trace_out = nullptr;
};

class Interpreter {
public:
    explicit Interpreter(const ClassModel& model, InterpreterOptions opts = {})
        : model_(model), opts_(opts) {}

    const Store& store() const { return store_; }
    Store& store() { return store_; }

    // Expression evaluation; no store mutation.
    Value eval(const Env& env, const ExprPtr& e) {
        if (auto* c = std::get_if<Expression::Constant>(&e->node))
            return Value(c->value);
        if (std::holds_alternative<Expression::Nil>(e->node))
            return Value(std::int32_t{0}); // nil evaluates to 0
        if (auto* v = std::get_if<Expression::Variable>(&e->node)) {
            auto it = env.find(v->name);
            if (it == env.end())
                throw RuntimeError(RuntimeError::Kind::Internal, e->loc,
                                   "unbound variable '" + v->name + "'");
            return store_value(it->second, e->loc);
        }
        const auto& b = std::get<Expression::Binary>(e->node);
        Value lv = eval(env, b.left);
        Value rv = eval(env, b.right);
        if (b.op == BinOp::Eq)
            return Value(std::int32_t(lv.as_number() == rv.as_number() ? 1 : 0));
        if (b.op == BinOp::Ne)
            return Value(std::int32_t(lv.as_number() != rv.as_number() ? 1 : 0));
        if (!lv.is_int() || !rv.is_int())
            throw RuntimeError(RuntimeError::Kind::Internal, e->loc,
                               "non-integer operand in arithmetic");
        return Value(apply_binop(b.op, lv.as_int(), rv.as_int(), e->loc));
    }

    void exec_seq(Location this_loc, const Env& env, const StmtSeq& seq, bool backward = false) {
        if (!backward) {
            for (const auto& s : seq)
                exec(this_loc, env, s, false);
        } else {
            for (auto it = seq.rbegin(); it != seq.rend(); ++it)
                exec(this_loc, env, *it, true);
        }
    }

    // Figs 3.12-3.13. backward means: execute I[s] forward.
    void exec(Location this_loc, const Env& env, const Statement& s, bool backward = false) {
        if (backward) {
            exec(this_loc, env, invert_statement(s), false);
            return;
        }
        if (opts_.trace && opts_.trace_out)
            trace_line(s);
        using S = Statement;
        if (auto* x = std::get_if<S::Assign>(&s.node)) {
            Value v = eval(env, x->expr);
            Location loc = lookup(env, x->target, s.loc);
            Value old = store_value(loc, s.loc);
            if (!old.is_int() || !v.is_int())
                throw RuntimeError(RuntimeError::Kind::Internal, s.loc,
                                   "reversible update on a non-integer value");
            BinOp op = x->op == ModOp::Add ? BinOp::Add
                       : x->op == ModOp::Sub ? BinOp::Sub
                                             : BinOp::Xor;
            store_[loc] = Value(apply_binop(op, old.as_int(), v.as_int(), s.loc));
            return;
        }
        if (auto* x = std::get_if<S::Swap>(&s.node)) {
            Location l1 = lookup(env, x->left, s.loc);
            Location l2 = lookup(env, x->right, s.loc);
            std::swap(store_[l1], store_[l2]);
            return;
        }
        if (auto* x = std::get_if<S::If>(&s.node)) {
            bool taken = eval(env, x->entry).as_number() != 0;
            exec_seq(this_loc, env, taken ? x->then_branch : x->else_branch);
            bool exit_val = eval(env, x->exit).as_number() != 0;
            if (exit_val != taken)
                throw RuntimeError(RuntimeError::Kind::AssertionIf, s.loc,
                                   taken ? "exit assertion false after then-branch"
                                         : "exit assertion true after else-branch");
            return;
        }
        if (auto* x = std::get_if<S::Loop>(&s.node)) {
            if (eval(env, x->entry).as_number() == 0)
                throw RuntimeError(RuntimeError::Kind::AssertionLoop, s.loc,
                                   "loop entry assertion false on first arrival");
            exec_seq(this_loc, env, x->do_body);
            while (eval(env, x->exit).as_number() == 0) {
                exec_seq(this_loc, env, x->loop_body);
                if (eval(env, x->entry).as_number() != 0)
                    throw RuntimeError(RuntimeError::Kind::AssertionLoop, s.loc,
                                       "loop entry assertion true on re-entry");
                exec_seq(this_loc, env, x->do_body);
            }
            return;
        }
        if (auto* x = std::get_if<S::ObjectBlock>(&s.node)) {
            exec_object_block(this_loc, env, *x, s.loc);
            return;
        }
        if (auto* x = std::get_if<S::LocalBlock>(&s.node)) {
            const auto& decl = x->decls.front();
            const auto& exit = x->exits.front();
            Value init = eval(env, decl.expr);
            Location cell = allocate();
            store_[cell] = init;
            Env inner = env;
            inner[decl.name] = cell;
            exec_seq(this_loc, inner, x->body);
            Value expected = eval(inner, exit.expr);
            if (!(store_value(cell, s.loc) == expected))
                throw RuntimeError(RuntimeError::Kind::DelocalMismatch, s.loc,
                                   "value of '" + decl.name +
                                       "' does not match its delocal expression");
            store_.erase(cell);
            return;
        }
        if (auto* x = std::get_if<S::Invocation>(&s.node)) {
            exec_invocation(this_loc, env, *x, s.loc);
            return;
        }
        if (std::holds_alternative<S::Reversal>(s.node))
            throw RuntimeError(RuntimeError::Kind::Internal, s.loc,
                               "reversal statement in core execution");
        // Skip
    }

    // Rule Main. Returns the composite (mu' . gamma): field name -> value.
    std::vector<std::pair<std::string, Value>> run_program() {
        const ClassInfo& main_info = model_.info(model_.main_class);

        Env env;
        Location next = 1;
        for (const auto& f : main_info.layout_fields) {
            env[f.name] = next;
            store_[next] = Value(std::int32_t{0});
            ++next;
        }
        Location main_obj = next;
        store_[main_obj] = Value(ObjVal{model_.main_class, env});
        next_ = main_obj + 1;

        exec_seq(main_obj, env, model_.main_method->body);

        std::vector<std::pair<std::string, Value>> out;
        for (const auto& f : main_info.layout_fields)
            out.emplace_back(f.name, store_value(env.at(f.name), {}));
        return out;
    }

    Location allocate() { return next_++; }

    // Marks locations below `first_free` as in use (test harness setup).
    void reserve_locations(Location first_free) {
        if (next_ < first_free)
            next_ = first_free;
    }

private:
    const ClassModel& model_;
    InterpreterOptions opts_;
    Store store_;
    Location next_ = 1;
    long long depth_ = 0;

    Location lookup(const Env& env, const std::string& name, SourceLoc loc) const {
        auto it = env.find(name);
        if (it == env.end())
            throw RuntimeError(RuntimeError::Kind::Internal, loc,
                               "unbound variable '" + name + "'");
        return it->second;
    }

    Value store_value(Location loc, SourceLoc sloc) const {
        auto it = store_.find(loc);
        if (it == store_.end())
            throw RuntimeError(RuntimeError::Kind::Internal, sloc,
                               "access to unmapped location " + std::to_string(loc));
        return it->second;
    }

    void trace_line(const Statement& s) {
        static const char* names[] = {"assign",      "swap",  "if",         "loop", "construct",
                                      "local",       "call",  "skip",       "reversal"};
        *opts_.trace_out << "[trace] " << names[s.node.index()] << " at " << to_string(s.loc)
                         << "\n";
    }

    void exec_object_block(Location this_loc, const Env& env, const Statement::ObjectBlock& block,
                           SourceLoc loc) {
        const ClassInfo& info = model_.info(block.class_name);
        ObjVal obj;
        obj.class_name = block.class_name;
        std::vector<Location> field_cells;
        for (const auto& f : info.layout_fields) {
            Location a = allocate();
            obj.fields[f.name] = a;
            store_[a] = Value(std::int32_t{0});
            field_cells.push_back(a);
        }
        Location obj_loc = allocate();
        Location ref_cell = allocate();
        store_[obj_loc] = Value(std::move(obj));
        store_[ref_cell] = Value(LocVal{obj_loc});

        Env inner = env;
        inner[block.var] = ref_cell;
        exec_seq(this_loc, inner, block.body);

        for (std::size_t i = 0; i < field_cells.size(); ++i) {
            Value v = store_value(field_cells[i], loc);
            if (!(v == Value(std::int32_t{0})))
                throw RuntimeError(RuntimeError::Kind::NonZeroFieldsAtDestruct, loc,
                                   "field '" + info.layout_fields[i].name + "' of '" + block.var +
                                       "' is not zero at destruct");
        }
        if (!(store_value(ref_cell, loc) == Value(LocVal{obj_loc})))
            throw RuntimeError(RuntimeError::Kind::ReferenceNotRestored, loc,
                               "reference '" + block.var + "' not restored at destruct");

        // mu'' restricted to dom(mu)
        for (Location a : field_cells)
            store_.erase(a);
        store_.erase(obj_loc);
        store_.erase(ref_cell);
    }

    void exec_invocation(Location this_loc, const Env& env, const Statement::Invocation& inv,
                         SourceLoc loc) {
        Location target_loc = this_loc;
        if (inv.callee) {
            Location ref = lookup(env, *inv.callee, loc);
            Value v = store_value(ref, loc);
            if (v.is_int()) {
                if (v.as_int() == 0)
                    throw RuntimeError(RuntimeError::Kind::NilDereference, loc,
                                       "method call on nil reference '" + *inv.callee + "'");
                throw RuntimeError(RuntimeError::Kind::Internal, loc,
                                   "method call on a non-reference value");
            }
            target_loc = v.as_loc();
        }
        Value target = store_value(target_loc, loc);
        if (!target.is_obj())
            throw RuntimeError(RuntimeError::Kind::Internal, loc,
                               "method call target is not an object");
        const ObjVal& obj = target.as_obj();
        const ResolvedMethod* method = model_.find_method(obj.class_name, inv.method);
        if (!method)
            throw RuntimeError(RuntimeError::Kind::Internal, loc,
                               "class '" + obj.class_name + "' has no method '" + inv.method +
                                   "'");

        // Call-by-reference: parameter names bound to the argument locations,
        // laid over the object's field environment.
        Env callee_env = obj.fields;
        const auto& params = method->decl->params;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto* v = as_variable(inv.args[i]);
            if (!v)
                throw RuntimeError(RuntimeError::Kind::Internal, loc,
                                   "expression argument in core invocation");
            callee_env[params[i].name] = lookup(env, v->name, loc);
        }

        if (++depth_ > opts_.max_call_depth) {
            --depth_;
            throw RuntimeError(RuntimeError::Kind::StackOverflow, loc,
                               "maximum call depth exceeded");
        }
        exec_seq(target_loc, callee_env, method->decl->body, inv.is_uncall);
        --depth_;
    }
};

// Convenience wrapper over a checked core program and its model.
inline std::vector<std::pair<std::string, Value>> run_program(const ClassModel& model,
                                                              InterpreterOptions opts = {}) {
    Interpreter interp(model, opts);
    return interp.run_program();
}

} // namespace roopl
