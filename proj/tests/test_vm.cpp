#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "roopl/vm.hpp"

using namespace roopl::pisa;

namespace {

MachineState random_state(std::mt19937& rng, std::size_t mem = 64) {
    MachineState st;
    st.memory.assign(mem, 0);
    for (std::size_t i = 1; i < st.regs.size(); ++i)
        st.regs[i] = rng();
    for (auto& w : st.memory)
        w = rng();
    // EXCH addresses must land inside the small test memory.
    for (std::size_t i = 1; i < st.regs.size(); ++i)
        if (rng() % 2 == 0)
            st.regs[i] %= mem;
    st.br = static_cast<std::int32_t>(rng() % 1024) - 512;
    return st;
}

// Operand registers are kept pairwise distinct: the reversible register
// updates presume the destination differs from the sources (as in all
// generated code), e.g. ADD r r would double-then-zero instead of undoing.
Instruction random_instruction(std::mt19937& rng, Opcode op) {
    Instruction ins;
    ins.op = op;
    int base = 1 + static_cast<int>(rng() % 28);
    for (int i = 0; i < 3; ++i)
        ins.regs[static_cast<std::size_t>(i)] = base + i;
    ins.imm = static_cast<std::int32_t>(rng());
    if (shape(op).label)
        ins.target = "t";
    return ins;
}

} // namespace

TEST_CASE("load materializes DATA words and finds START") {
    auto mp = resolve(parse_pal("DATA 3\nDATA -1\nDATA 7\ns: START\nFINISH\n"));
    MachineState st = load(mp, 128);
    CHECK(st.memory[0] == 3u);
    CHECK(st.memory[1] == 0xFFFFFFFFu);
    CHECK(st.memory[2] == 7u);
    CHECK(st.pc == 3);
    CHECK(st.br == 0);
    CHECK(st.dir == 1);
    for (std::size_t i = 3; i < st.memory.size(); ++i)
        CHECK(st.memory[i] == 0u);
}

TEST_CASE("load rejects programs without or with duplicate START") {
    CHECK_THROWS_AS(load(resolve(parse_pal("ADDI $4 1\nFINISH\n"))), VmError);
    CHECK_THROWS_AS(load(resolve(parse_pal("START\nSTART\nFINISH\n"))), VmError);
    CHECK_THROWS_AS(load(resolve(parse_pal("START\nFINISH\n")), 1), VmError);
}

TEST_CASE("plain stepping adds the direction bit to the PC") {
    auto mp = resolve(parse_pal("START\nADDI $4 5\nFINISH\n"));
    Vm vm(mp, 64);
    vm.step();
    CHECK(vm.state().pc == 1);
    vm.step();
    CHECK(vm.state().pc == 2);
    CHECK(vm.state().regs[4] == 5u);
    vm.step();
    CHECK(vm.state().halted);
    CHECK(vm.state().pc == 2); // FINISH does not advance
}

TEST_CASE("ADDI subtracts when the direction bit is negative") {
    auto mp = resolve(parse_pal("START\nADDI $4 5\nFINISH\n"));
    Vm vm(mp, 64);
    vm.state().pc = 1;
    vm.state().dir = -1;
    vm.state().regs[4] = 12;
    vm.step();
    CHECK(vm.state().regs[4] == 7u);
    CHECK(vm.state().pc == 0);
}

TEST_CASE("EXCH swaps a register with memory and is its own inverse") {
    auto mp = resolve(parse_pal("START\nEXCH $4 $5\nEXCH $4 $5\nFINISH\n"));
    Vm vm(mp, 64);
    vm.state().regs[4] = 77;
    vm.state().regs[5] = 9;
    vm.state().memory[9] = 123;
    vm.step();
    vm.step();
    CHECK(vm.state().regs[4] == 123u);
    CHECK(vm.state().memory[9] == 77u);
    vm.step();
    CHECK(vm.state().regs[4] == 77u);
    CHECK(vm.state().memory[9] == 123u);
}

TEST_CASE("writes to register zero and bad addresses trap") {
    auto mp = resolve(parse_pal("START\nXORI $0 1\nFINISH\n"));
    Vm vm(mp, 64);
    vm.step();
    CHECK_THROWS_AS(vm.step(), VmError);

    auto mp2 = resolve(parse_pal("START\nEXCH $4 $5\nFINISH\n"));
    Vm vm2(mp2, 64);
    vm2.state().regs[5] = 4096; // outside the 64-word memory
    vm2.step();
    CHECK_THROWS_AS(vm2.step(), VmError);
}

TEST_CASE("executing a DATA word traps") {
    auto mp = resolve(parse_pal("START\nDATA 3\nFINISH\n"));
    Vm vm(mp, 64);
    vm.step();
    CHECK_THROWS_AS(vm.step(), VmError);
}

TEST_CASE("branch offsets accumulate in BR and steer the PC") {
    // Forward jump over one instruction via a paired branch.
    auto mp = resolve(parse_pal(R"(START
a: BRA b
XORI $4 1
b: BRA a
FINISH
)"));
    Vm vm(mp, 64);
    vm.step(); // START
    vm.step(); // BRA b: BR = +2, jump to b
    CHECK(vm.state().pc == 3);
    CHECK(vm.state().br == 2);
    vm.step(); // BRA a: BR back to 0, fall through
    CHECK(vm.state().br == 0);
    CHECK(vm.state().pc == 4);
    vm.step();
    CHECK(vm.state().halted);
    CHECK(vm.state().regs[4] == 0u); // skipped
}

TEST_CASE("conditional branches test the register file") {
    auto mp = resolve(parse_pal(R"(START
t: BEQ $4 $0 e
XORI $5 1
e: BEQ $4 $0 t
FINISH
)"));
    SECTION("taken when equal") {
        Vm vm(mp, 64);
        vm.run(100);
        CHECK(vm.state().regs[5] == 0u);
    }
    SECTION("not taken when different") {
        Vm vm(mp, 64);
        vm.state().regs[4] = 3;
        vm.run(100);
        CHECK(vm.state().regs[5] == 1u);
    }
}

TEST_CASE("identical loads and limits produce identical final states") {
    auto mp = resolve(parse_pal(R"(START
ADDI $4 7
t: BEQ $4 $0 e
RL $4 3
e: BEQ $4 $0 t
EXCH $4 $5
FINISH
)"));
    Vm a(mp, 128);
    Vm b(mp, 128);
    a.run(1000);
    b.run(1000);
    CHECK(a.state().same_configuration(b.state()));
    CHECK(a.state().steps == b.state().steps);
    CHECK(a.state().dir == b.state().dir);
}

TEST_CASE("signed branch conditions at the word minimum") {
    MachineState st;
    st.memory.assign(16, 0);
    st.regs[4] = 0x80000000u; // INT32_MIN
    Vm::exec_instruction(st, make_ins(Opcode::BGTZ, {4}, 0, "t"), 5);
    CHECK(st.br == 0); // not taken
    Vm::exec_instruction(st, make_ins(Opcode::BLEZ, {4}, 0, "t"), 5);
    CHECK(st.br == 5); // taken
    Vm::exec_instruction(st, make_ins(Opcode::BLTZ, {4}, 0, "t"), 5);
    CHECK(st.br == 10); // taken
    Vm::exec_instruction(st, make_ins(Opcode::BGEZ, {4}, 0, "t"), 5);
    CHECK(st.br == 10); // not taken
}

TEST_CASE("a forward RBRA flips the direction bit") {
    MachineState st;
    st.memory.assign(16, 0);
    Vm::exec_instruction(st, make_ins(Opcode::RBRA, {}, 0, "x"), 3);
    CHECK(st.dir == -1);
    CHECK(st.br == -3);
}

TEST_CASE("step limit returns the state for inspection") {
    auto mp = resolve(parse_pal("START\nADDI $4 1\nADDI $4 1\nADDI $4 1\nADDI $4 1\nFINISH\n"));
    Vm vm(mp, 64);
    CHECK_THROWS_AS(vm.run(3), VmError);
    CHECK(vm.state().steps == 3);
    CHECK_FALSE(vm.state().halted);
}

TEST_CASE("per-instruction reversibility over random states") {
    // exec with DIR then exec again with -DIR must restore registers,
    // memory and BR for every variant (the inversion-table rows and the
    // self-inverse remainder).
    std::mt19937 rng(2024);
    for (int variant = 0; variant < 34; ++variant) {
        auto op = static_cast<Opcode>(variant);
        if (op == Opcode::DATA || op == Opcode::START || op == Opcode::FINISH)
            continue;
        for (int trial = 0; trial < 100; ++trial) {
            MachineState st = random_state(rng);
            Instruction ins = random_instruction(rng, op);
            if (op == Opcode::EXCH)
                st.regs[static_cast<std::size_t>(ins.regs[1])] %= st.memory.size();
            MachineState before = st;
            std::int32_t offset = static_cast<std::int32_t>(rng() % 64) - 32;
            Vm::exec_instruction(st, ins, offset);
            st.dir = -st.dir;
            Vm::exec_instruction(st, ins, offset);
            CAPTURE(variant, trial);
            REQUIRE(st.regs == before.regs);
            REQUIRE(st.memory == before.memory);
            REQUIRE(st.br == before.br);
        }
    }
}

TEST_CASE("forward then reverse restores a straight-line program bit-exactly") {
    const char* text = R"(START
ADDI $4 123
XORI $5 77
ADD $5 $4
RL $6 3
NEG $6
SUB $4 $5
ANDX $7 $4 $5
EXCH $7 $8
FINISH
)";
    std::mt19937 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        auto mp = resolve(parse_pal(text));
        Vm vm(mp, 64);
        for (std::size_t r = 4; r < 32; ++r)
            vm.state().regs[r] = rng();
        vm.state().regs[8] %= 64;
        MachineState initial = vm.state();
        vm.run(1000);
        CHECK(vm.state().halted);
        vm.reverse_run(1000);
        CHECK(vm.state().halted);
        REQUIRE(vm.state().same_configuration(initial));
    }
}

TEST_CASE("whole-trace reversal crosses an RBRA direction flip") {
    // RBRA jumps into a self-inverse block running backwards, returns, and
    // the paired BRA restores forward execution.
    const char* text = R"(START
ADDI $4 10
ADDI $5 0
top: RBRA bot
j: SWAPBR $6
NEG $6
bot: BRA top
ADDI $4 -3
FINISH
)";
    auto mp = resolve(parse_pal(text));
    Vm vm(mp, 256);
    MachineState initial = vm.state();
    vm.run(1000);
    CHECK(vm.state().halted);
    CHECK(vm.state().dir == 1);
    vm.reverse_run(1000);
    REQUIRE(vm.state().same_configuration(initial));
}
