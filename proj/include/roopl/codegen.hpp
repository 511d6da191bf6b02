#pragma once

#include <array>
#include <cassert>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "roopl/ast.hpp"
#include "roopl/class_model.hpp"
#include "roopl/pisa.hpp"

namespace roopl {

struct CodegenError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CodegenOptions {
    bool runtime_checks = false;
};

struct CompiledProgram {
    std::vector<pisa::Instruction> code; // static DATA section followed by code
    std::map<std::string, std::int32_t> output_cells; // main field -> static address
    std::int32_t static_size = 0;
    std::int32_t stack_base = 0; // p: first address past the program image
};

namespace detail {

using pisa::Instruction;
using pisa::Opcode;

// Fixed register roles: $0 reads zero, $1 is the stack pointer, $2 holds
// return offsets, $3 the object pointer. $4..$31 form the allocation pool.
constexpr int kRegZero = 0;
constexpr int kRegSp = 1;
constexpr int kRegRo = 2;
constexpr int kRegThis = 3;
constexpr int kPoolFirst = 4;
constexpr int kPoolLast = 31;

// How a ROOPL variable is reachable from the current method. Cell-resident
// variables (parameters, locals) keep their cell address in a register;
// object block variables keep the object base address itself.
struct VarSlot {
    enum class Kind { Param, Local, Object } kind = Kind::Param;
    int reg = 0;
    std::string static_class; // class name for reference-typed variables
};

class Emitter {
public:
    Emitter(const ClassModel& model, CodegenOptions opts) : model_(model), opts_(opts) {}

    CompiledProgram compile(const Program& prog) {
        emit_static_section(prog);
        for (const auto& cls : prog.classes)
            for (const auto& m : cls.methods)
                emit_method(cls.name, m);
        emit_prelude_postlude();
        return link();
    }

private:
    const ClassModel& model_;
    CodegenOptions opts_;
    std::vector<Instruction> statics_;
    std::vector<Instruction> code_;
    std::map<std::string, std::string> vtable_label_;
    std::map<std::string, std::string> output_labels_;
    int label_counter_ = 0;

    struct DataFixup {
        std::size_t static_index;
        std::string label;
    };
    // Immediate fixups against the final layout: address of a label (plus an
    // addend) or the stack base p when the label is empty; `negate` turns
    // ADDI into its SUBI reading.
    struct ImmFixup {
        std::size_t code_index;
        std::string label;
        std::int32_t addend = 0;
        bool negate = false;
    };
    std::vector<DataFixup> data_fixups_;
    std::vector<ImmFixup> imm_fixups_;

    // Per-method context.
    std::map<std::string, VarSlot> slots_;
    std::vector<std::pair<std::string, int>> scope_regs_; // name, register
    std::array<bool, 32> reg_used_{};
    std::string current_class_;

    // ------------------------------------------------------------------
    // Emission primitives

    void emit(Instruction ins) { code_.push_back(std::move(ins)); }

    void op(Opcode o, std::initializer_list<int> regs = {}, std::int32_t imm = 0,
            std::string comment = {}) {
        emit(pisa::make_ins(o, regs, imm, {}, std::move(comment)));
    }

    void branch(Opcode o, std::initializer_list<int> regs, std::string target,
                std::string comment = {}) {
        emit(pisa::make_ins(o, regs, 0, std::move(target), std::move(comment)));
    }

    void labeled(const std::string& label, Instruction ins) {
        ins.label = label;
        emit(std::move(ins));
    }

    void op_fix(Opcode o, std::initializer_list<int> regs, std::string label,
                std::int32_t addend, bool negate, std::string comment = {}) {
        imm_fixups_.push_back({code_.size(), std::move(label), addend, negate});
        emit(pisa::make_ins(o, regs, 0, {}, std::move(comment)));
    }

    int alloc_reg() {
        for (int r = kPoolFirst; r <= kPoolLast; ++r) {
            if (!reg_used_[static_cast<std::size_t>(r)]) {
                reg_used_[static_cast<std::size_t>(r)] = true;
                return r;
            }
        }
        throw CodegenError("register pool exhausted");
    }

    void release_reg(int r) { reg_used_[static_cast<std::size_t>(r)] = false; }

    void push(int r, std::string comment = {}) {
        op(Opcode::EXCH, {r, kRegSp}, 0, std::move(comment));
        op(Opcode::ADDI, {kRegSp}, 1);
    }

    void pop(int r, std::string comment = {}) {
        op(Opcode::ADDI, {kRegSp}, -1);
        op(Opcode::EXCH, {r, kRegSp}, 0, std::move(comment));
    }

    std::string method_entry_label(const std::string& cls, const std::string& method) const {
        return "l_" + cls + "_" + method;
    }

    std::string error_label() const { return "l_error"; }

    // ------------------------------------------------------------------
    // Expression evaluation. All emitted expression code is straight-line
    // (conditionals are computed arithmetically), so the unevaluation is the
    // exact per-instruction inverse in reverse order.

    struct EvalBlock {
        std::size_t begin = 0;
        std::size_t end = 0;
        int result = -1;
        std::vector<int> temps;
    };

    int temp(EvalBlock& block) {
        int r = alloc_reg();
        block.temps.push_back(r);
        return r;
    }

    void uneval(const EvalBlock& block) {
        for (std::size_t i = block.end; i > block.begin; --i) {
            Instruction inv = pisa::invert_instruction(code_[i - 1]);
            inv.label.clear();
            emit(std::move(inv));
        }
        for (auto it = block.temps.rbegin(); it != block.temps.rend(); ++it)
            release_reg(*it);
    }

    // result ^= (x != 0); x untouched, scratch cleared in place.
    void emit_nonzero(int x, int result) {
        int u = alloc_reg();
        int v = alloc_reg();
        op(Opcode::XOR, {u, x});
        op(Opcode::NEG, {u});
        op(Opcode::ORX, {v, x, u}); // x | -x has the sign bit set iff x != 0
        op(Opcode::SRLX, {result, v}, 31);
        op(Opcode::ORX, {v, x, u});
        op(Opcode::NEG, {u});
        op(Opcode::XOR, {u, x});
        release_reg(v);
        release_reg(u);
    }

    // result ^= (a < b), signed, overflow-safe:
    // msb of (a-b) ^ ((a^b) & ((a-b)^a)).
    void emit_less_than(int a, int b, int result) {
        int d = alloc_reg();
        int x = alloc_reg();
        int y = alloc_reg();
        int z = alloc_reg();
        int w = alloc_reg();
        op(Opcode::XOR, {d, a});
        op(Opcode::SUB, {d, b});
        op(Opcode::XOR, {x, a});
        op(Opcode::XOR, {x, b});
        op(Opcode::XOR, {y, d});
        op(Opcode::XOR, {y, a});
        op(Opcode::ANDX, {z, x, y});
        op(Opcode::XOR, {w, d});
        op(Opcode::XOR, {w, z});
        op(Opcode::SRLX, {result, w}, 31);
        op(Opcode::XOR, {w, z});
        op(Opcode::XOR, {w, d});
        op(Opcode::ANDX, {z, x, y});
        op(Opcode::XOR, {y, a});
        op(Opcode::XOR, {y, d});
        op(Opcode::XOR, {x, b});
        op(Opcode::XOR, {x, a});
        op(Opcode::ADD, {d, b});
        op(Opcode::XOR, {d, a});
        for (int r : {w, z, y, x, d})
            release_reg(r);
    }

    void emit_equality(int a, int b, int result, bool want_equal) {
        int t = alloc_reg();
        op(Opcode::XOR, {t, a});
        op(Opcode::XOR, {t, b});
        emit_nonzero(t, result);
        op(Opcode::XOR, {t, b});
        op(Opcode::XOR, {t, a});
        release_reg(t);
        if (want_equal)
            op(Opcode::XORI, {result}, 1);
    }

    // result += a * b (32-bit wrap): shift-and-add over each bit of b with a
    // mask in place of a conditional.
    void emit_multiply(int a, int b, int result) {
        int u = alloc_reg();
        int t = alloc_reg();
        int m = alloc_reg();
        int s = alloc_reg();
        int g = alloc_reg();
        for (int i = 0; i < 32; ++i) {
            op(Opcode::SRLX, {u, b}, i);
            op(Opcode::ANDIX, {t, u}, 1);
            op(Opcode::XOR, {m, t});
            op(Opcode::NEG, {m});
            op(Opcode::SLLX, {s, a}, i);
            op(Opcode::ANDX, {g, s, m});
            op(Opcode::ADD, {result, g});
            op(Opcode::ANDX, {g, s, m});
            op(Opcode::SLLX, {s, a}, i);
            op(Opcode::NEG, {m});
            op(Opcode::XOR, {m, t});
            op(Opcode::ANDIX, {t, u}, 1);
            op(Opcode::SRLX, {u, b}, i);
        }
        for (int r : {g, s, m, t, u})
            release_reg(r);
    }

    // qb ^= (x >= y) unsigned, both untouched:
    // 1 ^ msb((~x & y) | (~(x ^ y) & (x - y))).
    void emit_unsigned_ge(int x, int y, int qb) {
        int t1 = alloc_reg();
        int t2 = alloc_reg();
        int t3 = alloc_reg();
        int t4 = alloc_reg();
        int t5 = alloc_reg();
        int t6 = alloc_reg();
        op(Opcode::XOR, {t1, x});
        op(Opcode::XORI, {t1}, -1);
        op(Opcode::ANDX, {t2, t1, y});
        op(Opcode::XOR, {t3, x});
        op(Opcode::XOR, {t3, y});
        op(Opcode::XORI, {t3}, -1);
        op(Opcode::XOR, {t4, x});
        op(Opcode::SUB, {t4, y});
        op(Opcode::ANDX, {t5, t3, t4});
        op(Opcode::ORX, {t6, t2, t5});
        op(Opcode::SRLX, {qb, t6}, 31);
        op(Opcode::XORI, {qb}, 1);
        op(Opcode::ORX, {t6, t2, t5});
        op(Opcode::ANDX, {t5, t3, t4});
        op(Opcode::ADD, {t4, y});
        op(Opcode::XOR, {t4, x});
        op(Opcode::XORI, {t3}, -1);
        op(Opcode::XOR, {t3, y});
        op(Opcode::XOR, {t3, x});
        op(Opcode::ANDX, {t2, t1, y});
        op(Opcode::XORI, {t1}, -1);
        op(Opcode::XOR, {t1, x});
        for (int r : {t6, t5, t4, t3, t2, t1})
            release_reg(r);
    }

    // Restoring long division of |a| by |b|, then a sign correction matching
    // truncation toward zero. The computation is replayed backwards once the
    // requested output has been copied, so only `result` survives. A zero
    // divisor branches to the error trap and never returns.
    void emit_divmod(int a, int b, int result, bool want_mod) {
        branch(Opcode::BEQ, {b, kRegZero}, error_label(), "division by zero check");

        std::size_t core_begin = code_.size();
        int sa = alloc_reg();
        int ma = alloc_reg();
        int va = alloc_reg();
        int sb = alloc_reg();
        int mb = alloc_reg();
        int vb = alloc_reg();
        op(Opcode::SRLX, {sa, a}, 31);
        op(Opcode::XOR, {ma, sa});
        op(Opcode::NEG, {ma});
        op(Opcode::XOR, {va, a});
        op(Opcode::XOR, {va, ma});
        op(Opcode::SUB, {va, ma}); // va = |a|
        op(Opcode::SRLX, {sb, b}, 31);
        op(Opcode::XOR, {mb, sb});
        op(Opcode::NEG, {mb});
        op(Opcode::XOR, {vb, b});
        op(Opcode::XOR, {vb, mb});
        op(Opcode::SUB, {vb, mb}); // vb = |b|

        int rem = alloc_reg();
        int quo = alloc_reg();
        int u = alloc_reg();
        int t = alloc_reg();
        int qb = alloc_reg();
        int mm = alloc_reg();
        int s = alloc_reg();
        for (int i = 31; i >= 0; --i) {
            op(Opcode::RL, {rem}, 1); // remainder < |b| <= 2^31: top bit clear
            op(Opcode::SRLX, {u, va}, i);
            op(Opcode::ANDIX, {t, u}, 1);
            op(Opcode::ADD, {rem, t});
            op(Opcode::ANDIX, {t, u}, 1);
            op(Opcode::SRLX, {u, va}, i);
            emit_unsigned_ge(rem, vb, qb);
            op(Opcode::SLLX, {quo, qb}, i); // record the quotient bit
            op(Opcode::XOR, {mm, qb});
            op(Opcode::NEG, {mm});
            op(Opcode::ANDX, {s, vb, mm});
            op(Opcode::SUB, {rem, s});
            op(Opcode::ANDX, {s, vb, mm});
            op(Opcode::NEG, {mm});
            op(Opcode::XOR, {mm, qb});
            op(Opcode::SRLX, {u, quo}, i); // clear qb against the recorded bit
            op(Opcode::ANDIX, {qb, u}, 1);
            op(Opcode::SRLX, {u, quo}, i);
        }
        std::size_t core_end = code_.size();

        if (want_mod) {
            // The remainder takes the sign of a.
            op(Opcode::XOR, {result, rem});
            op(Opcode::XOR, {result, ma});
            op(Opcode::SUB, {result, ma});
        } else {
            int sx = alloc_reg();
            int mq = alloc_reg();
            op(Opcode::XOR, {sx, sa});
            op(Opcode::XOR, {sx, sb});
            op(Opcode::XOR, {mq, sx});
            op(Opcode::NEG, {mq});
            op(Opcode::XOR, {result, quo});
            op(Opcode::XOR, {result, mq});
            op(Opcode::SUB, {result, mq});
            op(Opcode::NEG, {mq});
            op(Opcode::XOR, {mq, sx});
            op(Opcode::XOR, {sx, sb});
            op(Opcode::XOR, {sx, sa});
            release_reg(mq);
            release_reg(sx);
        }

        for (std::size_t i = core_end; i > core_begin; --i) {
            Instruction inv = pisa::invert_instruction(code_[i - 1]);
            inv.label.clear();
            emit(std::move(inv));
        }
        for (int r : {s, mm, qb, t, u, quo, rem, vb, mb, sb, va, ma, sa})
            release_reg(r);
    }

    int field_offset(const std::string& name, SourceLoc loc) const {
        const ClassInfo& info = model_.info(current_class_);
        auto it = info.field_offset.find(name);
        if (it == info.field_offset.end())
            throw CodegenError("unknown variable '" + name + "' at " + to_string(loc));
        return it->second;
    }

    // Runs `body(addr_reg)` with a register holding the cell address of a
    // cell-resident variable or instance field.
    template <class Fn>
    void with_cell_address(const std::string& name, SourceLoc loc, Fn&& body) {
        auto it = slots_.find(name);
        if (it != slots_.end()) {
            assert(it->second.kind != VarSlot::Kind::Object);
            body(it->second.reg);
            return;
        }
        int offset = field_offset(name, loc);
        op(Opcode::ADDI, {kRegThis}, offset);
        body(kRegThis);
        op(Opcode::ADDI, {kRegThis}, -offset);
    }

    bool is_object_slot(const std::string& name) const {
        auto it = slots_.find(name);
        return it != slots_.end() && it->second.kind == VarSlot::Kind::Object;
    }

    int emit_load_var(EvalBlock& block, const std::string& name, SourceLoc loc) {
        if (is_object_slot(name)) {
            int r = temp(block);
            op(Opcode::XOR, {r, slots_.at(name).reg});
            return r;
        }
        int tm = alloc_reg();
        int r = temp(block);
        with_cell_address(name, loc, [&](int addr) {
            op(Opcode::EXCH, {tm, addr});
            op(Opcode::XOR, {r, tm});
            op(Opcode::EXCH, {tm, addr});
        });
        release_reg(tm);
        return r;
    }

    int emit_expression(EvalBlock& block, const ExprPtr& e) {
        if (auto* c = std::get_if<Expression::Constant>(&e->node)) {
            int r = temp(block);
            op(Opcode::XORI, {r}, c->value);
            return r;
        }
        if (std::holds_alternative<Expression::Nil>(e->node)) {
            int r = temp(block);
            op(Opcode::XORI, {r}, 0);
            return r;
        }
        if (auto* v = std::get_if<Expression::Variable>(&e->node))
            return emit_load_var(block, v->name, e->loc);

        const auto& bin = std::get<Expression::Binary>(e->node);
        int a = emit_expression(block, bin.left);
        int b = emit_expression(block, bin.right);
        int r = temp(block);
        switch (bin.op) {
        case BinOp::Add:
            op(Opcode::XOR, {r, a});
            op(Opcode::ADD, {r, b});
            break;
        case BinOp::Sub:
            op(Opcode::XOR, {r, a});
            op(Opcode::SUB, {r, b});
            break;
        case BinOp::Xor:
            op(Opcode::XOR, {r, a});
            op(Opcode::XOR, {r, b});
            break;
        case BinOp::BitAnd: op(Opcode::ANDX, {r, a, b}); break;
        case BinOp::BitOr: op(Opcode::ORX, {r, a, b}); break;
        case BinOp::Mul: emit_multiply(a, b, r); break;
        case BinOp::Div: emit_divmod(a, b, r, false); break;
        case BinOp::Mod: emit_divmod(a, b, r, true); break;
        case BinOp::Eq: emit_equality(a, b, r, true); break;
        case BinOp::Ne: emit_equality(a, b, r, false); break;
        case BinOp::Lt: emit_less_than(a, b, r); break;
        case BinOp::Gt: emit_less_than(b, a, r); break;
        case BinOp::Le:
            emit_less_than(b, a, r);
            op(Opcode::XORI, {r}, 1);
            break;
        case BinOp::Ge:
            emit_less_than(a, b, r);
            op(Opcode::XORI, {r}, 1);
            break;
        case BinOp::LogAnd:
        case BinOp::LogOr: {
            int na = temp(block);
            int nb = temp(block);
            emit_nonzero(a, na);
            emit_nonzero(b, nb);
            op(bin.op == BinOp::LogAnd ? Opcode::ANDX : Opcode::ORX, {r, na, nb});
            emit_nonzero(b, nb);
            emit_nonzero(a, na);
            break;
        }
        }
        return r;
    }

    EvalBlock eval_value(const ExprPtr& e) {
        EvalBlock block;
        block.begin = code_.size();
        block.result = emit_expression(block, e);
        block.end = code_.size();
        return block;
    }

    // Guards are reduced to 0/1 before use by the control-flow schemes.
    EvalBlock eval_condition(const ExprPtr& e) {
        EvalBlock block;
        block.begin = code_.size();
        int raw = emit_expression(block, e);
        int norm = temp(block);
        emit_nonzero(raw, norm);
        block.result = norm;
        block.end = code_.size();
        return block;
    }

    // ------------------------------------------------------------------
    // Scope management with shadowing

    struct ScopeGuard {
        Emitter& em;
        std::string name;
        std::optional<VarSlot> shadowed;

        ScopeGuard(Emitter& e, const std::string& n, VarSlot slot) : em(e), name(n) {
            auto it = em.slots_.find(n);
            if (it != em.slots_.end())
                shadowed = it->second;
            em.slots_[n] = slot;
            em.scope_regs_.emplace_back(n, slot.reg);
        }
        ~ScopeGuard() {
            em.scope_regs_.pop_back();
            if (shadowed)
                em.slots_[name] = *shadowed;
            else
                em.slots_.erase(name);
        }
    };

    // ------------------------------------------------------------------
    // Statements

    void emit_seq(const StmtSeq& seq) {
        for (const auto& s : seq)
            emit_statement(s);
    }

    void emit_statement(const Statement& s) {
        using S = Statement;
        if (auto* x = std::get_if<S::Assign>(&s.node))
            emit_assign(*x, s.loc);
        else if (auto* x = std::get_if<S::Swap>(&s.node))
            emit_swap(*x, s.loc);
        else if (auto* x = std::get_if<S::If>(&s.node))
            emit_if(*x);
        else if (auto* x = std::get_if<S::Loop>(&s.node))
            emit_loop(*x);
        else if (auto* x = std::get_if<S::ObjectBlock>(&s.node))
            emit_object_block(*x);
        else if (auto* x = std::get_if<S::LocalBlock>(&s.node))
            emit_local_block(*x);
        else if (auto* x = std::get_if<S::Invocation>(&s.node))
            emit_invocation(*x, s.loc);
        else if (std::holds_alternative<S::Reversal>(s.node))
            throw CodegenError("reversal statement reached code generation");
        // Skip emits nothing.
    }

    void emit_assign(const Statement::Assign& node, SourceLoc loc) {
        EvalBlock e = eval_value(node.expr);
        Opcode update = node.op == ModOp::Add   ? Opcode::ADD
                        : node.op == ModOp::Sub ? Opcode::SUB
                                                : Opcode::XOR;
        int tt = alloc_reg();
        with_cell_address(node.target, loc, [&](int addr) {
            op(Opcode::EXCH, {tt, addr});
            op(update, {tt, e.result}, 0, node.target + " " + to_string(node.op) + " ...");
            op(Opcode::EXCH, {tt, addr});
        });
        release_reg(tt);
        uneval(e);
    }

    void emit_swap(const Statement::Swap& node, SourceLoc loc) {
        bool lo = is_object_slot(node.left);
        bool ro = is_object_slot(node.right);
        if (lo && ro) {
            int a = slots_.at(node.left).reg;
            int b = slots_.at(node.right).reg;
            op(Opcode::XOR, {a, b}, 0, node.left + " <=> " + node.right);
            op(Opcode::XOR, {b, a});
            op(Opcode::XOR, {a, b});
            return;
        }
        if (lo || ro) {
            const std::string& obj = lo ? node.left : node.right;
            const std::string& cell = lo ? node.right : node.left;
            int r = slots_.at(obj).reg;
            int t = alloc_reg();
            with_cell_address(cell, loc, [&](int addr) {
                op(Opcode::EXCH, {t, addr});
                op(Opcode::XOR, {r, t});
                op(Opcode::XOR, {t, r});
                op(Opcode::XOR, {r, t});
                op(Opcode::EXCH, {t, addr});
            });
            release_reg(t);
            return;
        }
        if (node.left == node.right)
            return; // swapping a cell with itself
        int t = alloc_reg();
        with_cell_address(node.left, loc, [&](int a1) { op(Opcode::EXCH, {t, a1}); });
        with_cell_address(node.right, loc, [&](int a2) { op(Opcode::EXCH, {t, a2}); });
        with_cell_address(node.left, loc, [&](int a1) { op(Opcode::EXCH, {t, a1}); });
        release_reg(t);
    }

    void emit_if(const Statement::If& node) {
        std::string id = std::to_string(label_counter_++);
        std::string l_test = "l_if_test_" + id;
        std::string l_false = "l_if_false_" + id;
        std::string l_true = "l_if_true_" + id;
        std::string l_assert = "l_if_assert_" + id;

        int rt = alloc_reg();
        EvalBlock e1 = eval_condition(node.entry);
        op(Opcode::XOR, {rt, e1.result}, 0, "copy entry condition");
        uneval(e1);

        labeled(l_test,
                pisa::make_ins(Opcode::BEQ, {rt, kRegZero}, 0, l_false, "jump if false"));
        op(Opcode::XORI, {rt}, 1, "clear test register");
        emit_seq(node.then_branch);
        op(Opcode::XORI, {rt}, 1, "set test register");
        labeled(l_true, pisa::make_ins(Opcode::BRA, {}, 0, l_assert, "jump"));
        labeled(l_false, pisa::make_ins(Opcode::BRA, {}, 0, l_test, "receive jump"));
        emit_seq(node.else_branch);
        labeled(l_assert,
                pisa::make_ins(Opcode::BNE, {rt, kRegZero}, 0, l_true, "receive jump"));

        EvalBlock e2 = eval_condition(node.exit);
        op(Opcode::XOR, {rt, e2.result}, 0, "clear with exit assertion");
        uneval(e2);
        if (opts_.runtime_checks)
            branch(Opcode::BNE, {rt, kRegZero}, error_label(), "exit assertion check");
        release_reg(rt);
    }

    void emit_loop(const Statement::Loop& node) {
        std::string id = std::to_string(label_counter_++);
        std::string l_entry = "l_loop_entry_" + id;
        std::string l_test = "l_loop_test_" + id;
        std::string l_assert = "l_loop_assert_" + id;
        std::string l_exit = "l_loop_exit_" + id;

        int rt = alloc_reg();
        op(Opcode::XORI, {rt}, 1, "arm loop register");
        labeled(l_entry,
                pisa::make_ins(Opcode::BEQ, {rt, kRegZero}, 0, l_assert, "receive jump"));
        EvalBlock e1 = eval_condition(node.entry);
        op(Opcode::XOR, {rt, e1.result}, 0, "clear with entry assertion");
        uneval(e1);
        if (opts_.runtime_checks)
            branch(Opcode::BNE, {rt, kRegZero}, error_label(), "entry assertion check");
        emit_seq(node.do_body);
        EvalBlock e2 = eval_condition(node.exit);
        op(Opcode::XOR, {rt, e2.result}, 0, "copy exit condition");
        uneval(e2);
        labeled(l_test,
                pisa::make_ins(Opcode::BNE, {rt, kRegZero}, 0, l_exit, "exit if done"));
        emit_seq(node.loop_body);
        labeled(l_assert, pisa::make_ins(Opcode::BRA, {}, 0, l_entry, "jump to top"));
        labeled(l_exit, pisa::make_ins(Opcode::BNE, {rt, kRegZero}, 0, l_test, "receive jump"));
        op(Opcode::XORI, {rt}, 1, "clear loop register");
        release_reg(rt);
    }

    void emit_object_block(const Statement::ObjectBlock& node) {
        const ClassInfo& info = model_.info(node.class_name);
        int rx = alloc_reg();
        int rv = alloc_reg();
        op(Opcode::XOR, {rx, kRegSp}, 0, "address of new object " + node.var);
        op_fix(Opcode::XORI, {rv}, vtable_label_.at(node.class_name), 0, false,
               "vtable address of " + node.class_name);
        op(Opcode::EXCH, {rv, kRegSp}, 0, "push vtable address");
        op(Opcode::ADDI, {kRegSp}, info.size, "allocate object");
        release_reg(rv);

        {
            ScopeGuard guard(*this, node.var,
                             {VarSlot::Kind::Object, rx, node.class_name});
            emit_seq(node.body);
        }

        rv = alloc_reg();
        op(Opcode::ADDI, {kRegSp}, -info.size, "deallocate object");
        if (opts_.runtime_checks) {
            int ta = alloc_reg();
            int tv = alloc_reg();
            for (int offset = 1; offset < info.size; ++offset) {
                op(Opcode::XOR, {ta, kRegSp});
                op(Opcode::ADDI, {ta}, offset);
                op(Opcode::EXCH, {tv, ta});
                branch(Opcode::BNE, {tv, kRegZero}, error_label(), "field zero check");
                op(Opcode::EXCH, {tv, ta});
                op(Opcode::ADDI, {ta}, -offset);
                op(Opcode::XOR, {ta, kRegSp});
            }
            release_reg(tv);
            release_reg(ta);
        }
        op(Opcode::EXCH, {rv, kRegSp}, 0, "pop vtable address");
        op_fix(Opcode::XORI, {rv}, vtable_label_.at(node.class_name), 0, false,
               "clear vtable register");
        op(Opcode::XOR, {rx, kRegSp}, 0, "clear object register");
        if (opts_.runtime_checks)
            branch(Opcode::BNE, {rx, kRegZero}, error_label(), "reference restored check");
        release_reg(rv);
        release_reg(rx);
    }

    void emit_local_block(const Statement::LocalBlock& node) {
        const auto& decl = node.decls.front();
        const auto& exit = node.exits.front();

        int rx = alloc_reg();
        int rt = alloc_reg();
        if (opts_.runtime_checks)
            branch(Opcode::BNE, {rt, kRegZero}, error_label(), "reverse delocal check");
        EvalBlock e1 = eval_value(decl.expr);
        op(Opcode::XOR, {rx, kRegSp}, 0, "address of local " + decl.name);
        op(Opcode::XOR, {rt, e1.result}, 0, "copy initializer");
        push(rt, "store " + decl.name);
        uneval(e1);

        {
            ScopeGuard guard(*this, decl.name, {VarSlot::Kind::Local, rx, {}});
            emit_seq(node.body);
        }

        EvalBlock e2 = eval_value(exit.expr);
        pop(rt, "reclaim " + decl.name);
        op(Opcode::XOR, {rt, e2.result}, 0, "clear against delocal expression");
        op(Opcode::XOR, {rx, kRegSp}, 0, "clear local address register");
        uneval(e2);
        if (opts_.runtime_checks)
            branch(Opcode::BNE, {rt, kRegZero}, error_label(), "delocal check");
        release_reg(rt);
        release_reg(rx);
    }

    // ------------------------------------------------------------------
    // Invocations

    struct ArgReg {
        enum class Kind { Direct, Spilled, Field } kind = Kind::Direct;
        int reg = 0;
        std::string name;
        int field_offset = 0;
    };

    void emit_invocation(const Statement::Invocation& inv, SourceLoc loc) {
        std::vector<std::string> args;
        for (const auto& a : inv.args)
            args.push_back(as_variable(a)->name);
        std::set<std::string> arg_set(args.begin(), args.end());

        // Acquire the callee object pointer first: for cell-resident callees
        // the pointer is copied into a register before the cell's address
        // register is saved away.
        bool dynamic = inv.callee.has_value();
        int rp = -1;
        bool fetched = false;
        if (dynamic) {
            if (is_object_slot(*inv.callee)) {
                rp = slots_.at(*inv.callee).reg;
            } else {
                rp = alloc_reg();
                fetched = true;
                int tm = alloc_reg();
                with_cell_address(*inv.callee, loc, [&](int addr) {
                    op(Opcode::EXCH, {tm, addr}, 0, "fetch callee " + *inv.callee);
                    op(Opcode::XOR, {rp, tm});
                    op(Opcode::EXCH, {tm, addr});
                });
                release_reg(tm);
            }
        }

        // The callee starts from a clean register file: save every live
        // register that is not already communicated through the stack.
        // Argument registers are zeroed by their own pushes (or spills), and
        // an object-variable callee travels as the new this-pointer.
        std::vector<int> saves;
        for (const auto& [name, reg] : scope_regs_) {
            bool active = slots_.count(name) && slots_.at(name).reg == reg;
            if (active && arg_set.count(name))
                continue;
            if (active && dynamic && !fetched && name == *inv.callee)
                continue;
            saves.push_back(reg);
        }
        for (int r : saves)
            push(r, "save live register");

        // Argument cell addresses. Object variables have no cell, so their
        // pointer is spilled into a fresh stack cell for the duration.
        std::vector<ArgReg> arg_regs;
        for (const auto& name : args) {
            auto it = slots_.find(name);
            if (it != slots_.end() && it->second.kind != VarSlot::Kind::Object) {
                arg_regs.push_back({ArgReg::Kind::Direct, it->second.reg, name});
            } else if (it != slots_.end()) {
                push(it->second.reg, "spill object reference " + name);
                int ra = alloc_reg();
                op(Opcode::XOR, {ra, kRegSp});
                op(Opcode::ADDI, {ra}, -1, "address of spilled " + name);
                arg_regs.push_back({ArgReg::Kind::Spilled, ra, name});
            } else {
                int offset = field_offset(name, loc);
                int ra = alloc_reg();
                op(Opcode::XOR, {ra, kRegThis});
                op(Opcode::ADDI, {ra}, offset, "address of field " + name);
                arg_regs.push_back({ArgReg::Kind::Field, ra, name, offset});
            }
        }

        if (!dynamic)
            emit_static_call(inv, arg_regs);
        else
            emit_dynamic_call(inv, arg_regs, rp, loc);

        for (auto it = arg_regs.rbegin(); it != arg_regs.rend(); ++it) {
            if (it->kind == ArgReg::Kind::Spilled) {
                op(Opcode::ADDI, {it->reg}, 1);
                op(Opcode::XOR, {it->reg, kRegSp});
                pop(slots_.at(it->name).reg, "reload object reference " + it->name);
                release_reg(it->reg);
            } else if (it->kind == ArgReg::Kind::Field) {
                op(Opcode::ADDI, {it->reg}, -it->field_offset);
                op(Opcode::XOR, {it->reg, kRegThis});
                release_reg(it->reg);
            }
        }
        for (auto it = saves.rbegin(); it != saves.rend(); ++it)
            pop(*it, "restore live register");

        if (fetched) {
            int tm = alloc_reg();
            with_cell_address(*inv.callee, loc, [&](int addr) {
                op(Opcode::EXCH, {tm, addr}, 0, "clear callee copy");
                op(Opcode::XOR, {rp, tm});
                op(Opcode::EXCH, {tm, addr});
            });
            release_reg(tm);
            release_reg(rp);
        }
    }

    void emit_static_call(const Statement::Invocation& inv, const std::vector<ArgReg>& arg_regs) {
        const ResolvedMethod* method = model_.find_method(current_class_, inv.method);
        assert(method != nullptr);
        for (auto it = arg_regs.rbegin(); it != arg_regs.rend(); ++it)
            push(it->reg, "push argument " + it->name);
        push(kRegThis, "push this");
        std::string entry = method_entry_label(method->owner, method->name);
        if (!inv.is_uncall)
            branch(Opcode::BRA, {}, entry, "call " + inv.method);
        else
            branch(Opcode::RBRA, {}, entry, "uncall " + inv.method);
        pop(kRegThis, "pop this");
        for (const auto& ar : arg_regs)
            pop(ar.reg, "pop argument " + ar.name);
    }

    void emit_dynamic_call(const Statement::Invocation& inv, const std::vector<ArgReg>& arg_regs,
                           int rp, SourceLoc loc) {
        int slot = dispatch_slot(*inv.callee, inv.method, loc);
        int rv = alloc_reg();
        int rt = alloc_reg();
        int rtgt = alloc_reg();
        std::string id = std::to_string(label_counter_++);
        std::string l_jmp = "l_jmp_" + id;

        auto vtable_access = [&](const std::string& what) {
            op(Opcode::EXCH, {rv, rp}, 0, "get address of vtable");
            op(Opcode::ADDI, {rv}, slot, "lookup " + inv.method + " in vtable");
            op(Opcode::EXCH, {rt, rv}, 0, "get address of " + inv.method);
            op(Opcode::XOR, {rtgt, rt}, 0, what);
            op(Opcode::EXCH, {rt, rv}, 0, "place address back in vtable");
            op(Opcode::ADDI, {rv}, -slot, "restore vtable pointer");
            op(Opcode::EXCH, {rv, rp}, 0, "restore object pointer");
        };

        vtable_access("copy address of " + inv.method);
        // The callee stashes the incoming register contents in these stack
        // cells as it pops its frame, so the current this-pointer must be
        // parked like every other live register.
        push(kRegThis, "save current this");
        for (auto it = arg_regs.rbegin(); it != arg_regs.rend(); ++it)
            push(it->reg, "push argument " + it->name);
        push(rp, "push new this");

        op_fix(Opcode::ADDI, {rtgt}, l_jmp, 0, true, "calculate jump offset");
        if (!inv.is_uncall) {
            labeled(l_jmp, pisa::make_ins(Opcode::SWAPBR, {rtgt}, 0, {}, "jump to method"));
            op(Opcode::NEG, {rtgt}, 0, "restore target register");
        } else {
            std::string l_top = "l_rjmp_top_" + id;
            std::string l_bot = "l_rjmp_bot_" + id;
            labeled(l_top, pisa::make_ins(Opcode::RBRA, {}, 0, l_bot, "flip direction"));
            labeled(l_jmp, pisa::make_ins(Opcode::SWAPBR, {rtgt}, 0, {}, "jump to method"));
            op(Opcode::NEG, {rtgt}, 0, "restore target register");
            labeled(l_bot, pisa::make_ins(Opcode::BRA, {}, 0, l_top, "paired branch"));
        }
        op_fix(Opcode::ADDI, {rtgt}, l_jmp, 0, false, "restore absolute jump value");

        pop(rp, "pop new this");
        for (const auto& ar : arg_regs)
            pop(ar.reg, "pop argument " + ar.name);
        pop(kRegThis, "restore current this");
        vtable_access("clear address of " + inv.method);

        release_reg(rtgt);
        release_reg(rt);
        release_reg(rv);
    }

    int dispatch_slot(const std::string& callee, const std::string& method, SourceLoc loc) {
        std::string static_class;
        auto it = slots_.find(callee);
        if (it != slots_.end()) {
            static_class = it->second.static_class;
        } else {
            const ClassInfo& info = model_.info(current_class_);
            for (const auto& f : info.layout_fields)
                if (f.name == callee)
                    static_class = f.type.class_name;
        }
        int slot = model_.vtable_slot(static_class, method);
        if (slot < 0)
            throw CodegenError("no vtable slot for " + static_class + "::" + method + " at " +
                               to_string(loc));
        return slot;
    }

    // ------------------------------------------------------------------
    // Statics, methods, prelude

    void emit_static_section(const Program& prog) {
        for (const auto& cls : prog.classes) {
            const ClassInfo& info = model_.info(cls.name);
            vtable_label_[cls.name] = "l_" + cls.name + "_vt";
            for (std::size_t slot = 0; slot < info.vtable.size(); ++slot) {
                Instruction data = pisa::make_ins(Opcode::DATA, {}, 0);
                if (slot == 0)
                    data.label = vtable_label_[cls.name];
                data.comment = info.vtable[slot].owner + "::" + info.vtable[slot].method;
                data_fixups_.push_back(
                    {statics_.size(),
                     method_entry_label(info.vtable[slot].owner, info.vtable[slot].method)});
                statics_.push_back(std::move(data));
            }
        }
        const ClassInfo& main_info = model_.info(model_.main_class);
        for (const auto& f : main_info.layout_fields) {
            Instruction data = pisa::make_ins(Opcode::DATA, {}, 0);
            data.label = "l_out_" + f.name;
            data.comment = "output cell for " + f.name;
            output_labels_[f.name] = data.label;
            statics_.push_back(std::move(data));
        }
    }

    void emit_method(const std::string& cls, const MethodDecl& m) {
        slots_.clear();
        scope_regs_.clear();
        reg_used_.fill(false);
        current_class_ = cls;

        std::vector<int> param_regs;
        std::vector<std::unique_ptr<ScopeGuard>> guards;
        for (const auto& p : m.params) {
            int r = alloc_reg();
            param_regs.push_back(r);
            guards.push_back(std::make_unique<ScopeGuard>(
                *this, p.name,
                VarSlot{VarSlot::Kind::Param, r,
                        p.type.is_class() ? p.type.class_name : std::string{}}));
        }

        std::string entry = method_entry_label(cls, m.name);
        labeled(entry + "_top",
                pisa::make_ins(Opcode::BRA, {}, 0, entry + "_bot", cls + "::" + m.name));
        pop(kRegRo, "load return offset");
        for (auto it = param_regs.rbegin(); it != param_regs.rend(); ++it)
            push(*it, "restore argument");
        push(kRegThis, "restore this-pointer");
        labeled(entry,
                pisa::make_ins(Opcode::SWAPBR, {kRegRo}, 0, {}, "method entry and exit point"));
        op(Opcode::NEG, {kRegRo}, 0, "negate return offset");
        pop(kRegThis, "load this-pointer");
        for (int r : param_regs)
            pop(r, "load argument");
        push(kRegRo, "store return offset");

        emit_seq(m.body);

        labeled(entry + "_bot", pisa::make_ins(Opcode::BRA, {}, 0, entry + "_top"));
    }

    void emit_prelude_postlude() {
        const ClassInfo& main_info = model_.info(model_.main_class);
        int size_m = main_info.size;
        std::string main_entry = method_entry_label(model_.main_class, "main");
        const std::string& vt = vtable_label_.at(model_.main_class);
        int rm = kPoolFirst;
        int rv = kPoolFirst + 1;

        labeled("start", pisa::make_ins(Opcode::START));
        op_fix(Opcode::ADDI, {kRegSp}, "", 0, false, "initialize stack pointer");
        op(Opcode::XOR, {rm, kRegSp}, 0, "store address of main object");
        op_fix(Opcode::XORI, {rv}, vt, 0, false, "store address of vtable");
        op(Opcode::EXCH, {rv, kRegSp}, 0, "push address of vtable");
        op(Opcode::ADDI, {kRegSp}, size_m, "allocate space for main object");
        push(rm, "push this");
        branch(Opcode::BRA, {}, main_entry, "call main");
        pop(rm, "pop this");
        op(Opcode::ADDI, {kRegSp}, -size_m, "deallocate main object");
        op(Opcode::EXCH, {rv, kRegSp}, 0, "pop vtable address");
        op_fix(Opcode::XORI, {rv}, vt, 0, false, "clear vtable register");
        op(Opcode::XOR, {rm, kRegSp}, 0, "clear main object register");
        op_fix(Opcode::ADDI, {kRegSp}, "", 0, true, "clear stack pointer");

        // Copy the output values from the former stack region into labeled
        // static cells, leaving the stack region zeroed.
        int ta = kPoolFirst;
        int tb = kPoolFirst + 1;
        int tc = kPoolFirst + 2;
        for (const auto& f : main_info.layout_fields) {
            int offset = main_info.field_offset.at(f.name);
            op_fix(Opcode::XORI, {ta}, "", offset, false, "stack address of " + f.name);
            op(Opcode::EXCH, {tb, ta}, 0, "fetch " + f.name);
            op_fix(Opcode::XORI, {tc}, output_labels_.at(f.name), 0, false,
                   "output cell address");
            op(Opcode::EXCH, {tb, tc}, 0, "store " + f.name);
            op_fix(Opcode::XORI, {tc}, output_labels_.at(f.name), 0, false);
            op_fix(Opcode::XORI, {ta}, "", offset, false);
        }
        labeled("finish", pisa::make_ins(Opcode::FINISH));

        // Error trap: absorbs any failed dynamic check, flags $31 and halts.
        labeled("l_error",
                pisa::make_ins(Opcode::SWAPBR, {30}, 0, {}, "capture branch offset"));
        op(Opcode::XORI, {31}, 1, "set error flag");
        op(Opcode::FINISH);
    }

    CompiledProgram link() {
        CompiledProgram out;
        out.static_size = static_cast<std::int32_t>(statics_.size());
        out.stack_base = out.static_size + static_cast<std::int32_t>(code_.size());

        std::map<std::string, std::int32_t> addresses;
        for (std::size_t i = 0; i < statics_.size(); ++i)
            if (!statics_[i].label.empty())
                addresses[statics_[i].label] = static_cast<std::int32_t>(i);
        for (std::size_t i = 0; i < code_.size(); ++i)
            if (!code_[i].label.empty())
                addresses[code_[i].label] = out.static_size + static_cast<std::int32_t>(i);

        for (const auto& fix : data_fixups_)
            statics_[fix.static_index].imm = addresses.at(fix.label);
        for (const auto& fix : imm_fixups_) {
            Instruction& ins = code_[fix.code_index];
            std::int32_t value =
                (fix.label.empty() ? out.stack_base : addresses.at(fix.label)) + fix.addend;
            ins.imm = fix.negate ? -value : value;
        }

        out.code = std::move(statics_);
        out.code.insert(out.code.end(), code_.begin(), code_.end());
        for (const auto& [field, label] : output_labels_)
            out.output_cells[field] = addresses.at(label);
        return out;
    }
};

} // namespace detail

// Translates a checked core program. The class model must belong to it.
inline CompiledProgram compile_program(const ClassModel& model, const Program& prog,
                                       CodegenOptions opts = {}) {
    detail::Emitter emitter(model, opts);
    return emitter.compile(prog);
}

} // namespace roopl
