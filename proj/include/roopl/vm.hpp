#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "roopl/pisa.hpp"

namespace roopl::pisa {

struct VmError : std::runtime_error {
    enum class Kind {
        NoStart,
        MultipleStart,
        ProgramTooLarge,
        BadAddress,
        WriteToZero,
        ExecutedData,
        PcOutOfRange,
        StepLimit,
    };
    Kind kind;
    std::int64_t pc;
    VmError(Kind k, std::int64_t p, const std::string& msg)
        : std::runtime_error(msg), kind(k), pc(p) {}
};

// Pendulum machine state. The direction bit selects between an instruction
// and its inverse and also the sign of the program-counter stepping.
struct MachineState {
    std::array<std::uint32_t, 32> regs{};
    std::vector<std::uint32_t> memory;
    std::int64_t pc = 0;
    std::int32_t br = 0;
    int dir = +1;
    bool halted = false;
    std::uint64_t steps = 0;

    std::uint32_t reg(int r) const { return r == 0 ? 0u : regs[static_cast<std::size_t>(r)]; }

    bool same_configuration(const MachineState& other) const {
        return regs == other.regs && memory == other.memory && pc == other.pc &&
               br == other.br;
    }
};

constexpr std::size_t kDefaultMemoryWords = std::size_t{1} << 20;

inline MachineState load(const MachineProgram& prog,
                         std::size_t memory_words = kDefaultMemoryWords) {
    if (prog.code.size() > memory_words)
        throw VmError(VmError::Kind::ProgramTooLarge, 0, "program exceeds memory");
    MachineState st;
    st.memory.assign(memory_words, 0);
    std::int64_t start = -1;
    for (std::size_t addr = 0; addr < prog.code.size(); ++addr) {
        const Instruction& ins = prog.code[addr];
        if (ins.op == Opcode::DATA)
            st.memory[addr] = static_cast<std::uint32_t>(ins.imm);
        if (ins.op == Opcode::START) {
            if (start >= 0)
                throw VmError(VmError::Kind::MultipleStart, static_cast<std::int64_t>(addr),
                              "more than one START instruction");
            start = static_cast<std::int64_t>(addr);
        }
    }
    if (start < 0)
        throw VmError(VmError::Kind::NoStart, 0, "program has no START instruction");
    st.pc = start;
    return st;
}

class Vm {
public:
    Vm(MachineProgram prog, std::size_t memory_words = kDefaultMemoryWords)
        : prog_(std::move(prog)), st_(load(prog_, memory_words)) {}

    MachineState& state() { return st_; }
    const MachineState& state() const { return st_; }
    const MachineProgram& program() const { return prog_; }

    // Executes the data-path/branch effect of one instruction on a state,
    // honoring the direction bit; the program counter is not touched. The
    // offset is the resolved relative branch target.
    static void exec_instruction(MachineState& st, const Instruction& raw,
                                 std::int32_t offset) {
        const Instruction ins = st.dir < 0 ? invert_instruction(raw) : raw;
        auto r = [&](int i) { return st.reg(ins.regs[static_cast<std::size_t>(i)]); };
        auto write = [&](int i, std::uint32_t v) {
            int idx = ins.regs[static_cast<std::size_t>(i)];
            if (idx == 0)
                throw VmError(VmError::Kind::WriteToZero, st.pc, "write to register 0");
            st.regs[static_cast<std::size_t>(idx)] = v;
        };
        auto imm = static_cast<std::uint32_t>(ins.imm);
        auto signed_r = [&](int i) { return static_cast<std::int32_t>(r(i)); };
        auto branch_if = [&](bool cond) {
            if (cond)
                st.br += offset * st.dir;
        };

        switch (ins.op) {
        case Opcode::ADD: write(0, r(0) + r(1)); break;
        case Opcode::SUB: write(0, r(0) - r(1)); break;
        case Opcode::ADDI: write(0, r(0) + imm); break;
        case Opcode::NEG: write(0, 0u - r(0)); break;
        case Opcode::XOR: write(0, r(0) ^ r(1)); break;
        case Opcode::XORI: write(0, r(0) ^ imm); break;
        case Opcode::ANDX: write(0, r(0) ^ (r(1) & r(2))); break;
        case Opcode::ANDIX: write(0, r(0) ^ (r(1) & imm)); break;
        case Opcode::ORX: write(0, r(0) ^ (r(1) | r(2))); break;
        case Opcode::ORIX: write(0, r(0) ^ (r(1) | imm)); break;
        case Opcode::NORX: write(0, r(0) ^ ~(r(1) | r(2))); break;
        case Opcode::RL: write(0, rotl(r(0), static_cast<std::uint32_t>(ins.imm))); break;
        case Opcode::RR: write(0, rotr(r(0), static_cast<std::uint32_t>(ins.imm))); break;
        case Opcode::RLV: write(0, rotl(r(0), r(1))); break;
        case Opcode::RRV: write(0, rotr(r(0), r(1))); break;
        case Opcode::SLLX: write(0, r(0) ^ (r(1) << (imm & 31u))); break;
        case Opcode::SRLX: write(0, r(0) ^ (r(1) >> (imm & 31u))); break;
        case Opcode::SRAX:
            write(0, r(0) ^ static_cast<std::uint32_t>(signed_r(1) >>
                                                       static_cast<int>(imm & 31u)));
            break;
        case Opcode::SLLVX: write(0, r(0) ^ (r(1) << (r(2) & 31u))); break;
        case Opcode::SRLVX: write(0, r(0) ^ (r(1) >> (r(2) & 31u))); break;
        case Opcode::SRAVX:
            write(0, r(0) ^ static_cast<std::uint32_t>(signed_r(1) >>
                                                       static_cast<int>(r(2) & 31u)));
            break;
        case Opcode::EXCH: {
            std::uint32_t addr = r(1);
            if (addr >= st.memory.size())
                throw VmError(VmError::Kind::BadAddress, st.pc,
                              "EXCH address " + std::to_string(addr) + " out of range");
            std::uint32_t tmp = r(0);
            write(0, st.memory[addr]);
            st.memory[addr] = tmp;
            break;
        }
        case Opcode::BEQ: branch_if(r(0) == r(1)); break;
        case Opcode::BNE: branch_if(r(0) != r(1)); break;
        case Opcode::BGEZ: branch_if(signed_r(0) >= 0); break;
        case Opcode::BGTZ: branch_if(signed_r(0) > 0); break;
        case Opcode::BLEZ: branch_if(signed_r(0) <= 0); break;
        case Opcode::BLTZ: branch_if(signed_r(0) < 0); break;
        case Opcode::BRA: st.br += offset * st.dir; break;
        case Opcode::RBRA:
            // Direction reversal: negate the accumulated offset and insert
            // the jump in the new direction. Satisfies both the initial
            // reverse-jump and the paired return traversal.
            st.dir = -st.dir;
            st.br = -st.br + offset * st.dir;
            break;
        case Opcode::SWAPBR: {
            std::uint32_t tmp = r(0);
            write(0, static_cast<std::uint32_t>(st.br));
            st.br = static_cast<std::int32_t>(tmp);
            break;
        }
        case Opcode::START:
        case Opcode::FINISH:
            break;
        case Opcode::DATA:
            throw VmError(VmError::Kind::ExecutedData, st.pc,
                          "program counter reached a DATA word");
        }
    }

    // One machine cycle: fetch, execute, then add BR*DIR (or DIR when BR is
    // zero) to the program counter. FINISH forward and START backward halt
    // without moving the program counter.
    void step() {
        if (st_.halted)
            return;
        if (st_.pc < 0 || st_.pc >= prog_.size())
            throw VmError(VmError::Kind::PcOutOfRange, st_.pc, "program counter out of range");
        const Instruction& ins = prog_.code[static_cast<std::size_t>(st_.pc)];
        if ((ins.op == Opcode::FINISH && st_.dir > 0) ||
            (ins.op == Opcode::START && st_.dir < 0)) {
            st_.halted = true;
            ++st_.steps;
            return;
        }
        exec_instruction(st_, ins, prog_.branch_offset[static_cast<std::size_t>(st_.pc)]);
        st_.pc += st_.br == 0 ? st_.dir : static_cast<std::int64_t>(st_.br) * st_.dir;
        ++st_.steps;
    }

    // Runs until halt or the step limit; throws StepLimit with the state
    // preserved for inspection.
    void run(std::uint64_t step_limit = 100'000'000) {
        std::uint64_t executed = 0;
        while (!st_.halted) {
            if (executed++ >= step_limit)
                throw VmError(VmError::Kind::StepLimit, st_.pc, "step limit exceeded");
            step();
        }
    }

    // Flips the direction bit and runs to the opposite endpoint. For any
    // completed forward trace this restores the pre-run configuration.
    void reverse_run(std::uint64_t step_limit = 100'000'000) {
        st_.dir = -st_.dir;
        st_.halted = false;
        run(step_limit);
    }

private:
    static std::uint32_t rotl(std::uint32_t v, std::uint32_t n) {
        n &= 31u;
        return n == 0 ? v : (v << n) | (v >> (32 - n));
    }
    static std::uint32_t rotr(std::uint32_t v, std::uint32_t n) {
        n &= 31u;
        return n == 0 ? v : (v >> n) | (v << (32 - n));
    }

    MachineProgram prog_;
    MachineState st_;
};

} // namespace roopl::pisa
