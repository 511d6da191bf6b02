#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "roopl/pisa.hpp"

using namespace roopl::pisa;

TEST_CASE("parse a labeled branch with a comment") {
    auto prog = parse_pal("top: BRA bot ; jump");
    REQUIRE(prog.size() == 1);
    CHECK(prog[0].op == Opcode::BRA);
    CHECK(prog[0].label == "top");
    CHECK(prog[0].target == "bot");
    CHECK(prog[0].comment == "jump");
}

TEST_CASE("parse the PUSH pseudoinstruction expansion") {
    auto prog = parse_pal("EXCH $7 $1\nADDI $1 1\n");
    REQUIRE(prog.size() == 2);
    CHECK(prog[0].op == Opcode::EXCH);
    CHECK(prog[0].regs[0] == 7);
    CHECK(prog[0].regs[1] == 1);
    CHECK(prog[1].op == Opcode::ADDI);
    CHECK(prog[1].imm == 1);
}

TEST_CASE("unknown mnemonics are rejected") {
    CHECK_THROWS_AS(parse_pal("FOO $1"), PisaError);
}

TEST_CASE("bad register names and missing operands are rejected") {
    CHECK_THROWS_AS(parse_pal("ADD $1 $32"), PisaError);
    CHECK_THROWS_AS(parse_pal("ADD $1 x3"), PisaError);
    CHECK_THROWS_AS(parse_pal("ADDI $1"), PisaError);
    CHECK_THROWS_AS(parse_pal("BRA"), PisaError);
    CHECK_THROWS_AS(parse_pal("ADD $1 $2 $3"), PisaError);
}

TEST_CASE("register names accept both dollar and r spellings") {
    auto prog = parse_pal("ADD r4 $5");
    CHECK(prog[0].regs[0] == 4);
    CHECK(prog[0].regs[1] == 5);
}

TEST_CASE("immediates take an optional sign") {
    auto prog = parse_pal("ADDI $4 -12\nDATA 7\nXORI $5 +3");
    CHECK(prog[0].imm == -12);
    CHECK(prog[1].imm == 7);
    CHECK(prog[2].imm == 3);
}

TEST_CASE("emit then parse is the identity up to whitespace") {
    const char* text = R"(start: START
ADDI $1 100
l0: BEQ $4 $0 l1
XORI $4 1
l1: BRA l0
SWAPBR $2
RBRA start
DATA -5
FINISH
)";
    auto prog = parse_pal(text);
    auto reparsed = parse_pal(emit_pal(prog));
    REQUIRE(prog.size() == reparsed.size());
    for (std::size_t i = 0; i < prog.size(); ++i)
        CHECK(prog[i] == reparsed[i]);
}

TEST_CASE("resolve computes relative offsets") {
    // BRA at address 10 targeting a label at 17 resolves to +7.
    std::vector<Instruction> prog;
    for (int i = 0; i < 10; ++i)
        prog.push_back(make_ins(Opcode::ADDI, {4}, 1));
    prog.push_back(make_ins(Opcode::BRA, {}, 0, "dest"));
    for (int i = 0; i < 6; ++i)
        prog.push_back(make_ins(Opcode::ADDI, {4}, 1));
    Instruction dest = make_ins(Opcode::ADDI, {4}, 1);
    dest.label = "dest";
    prog.push_back(dest);
    auto mp = resolve(prog);
    CHECK(mp.label_address.at("dest") == 17);
    CHECK(mp.branch_offset[10] == 7);
}

TEST_CASE("paired branches get negated offsets") {
    Instruction a = make_ins(Opcode::BRA, {}, 0, "B");
    a.label = "A";
    Instruction filler = make_ins(Opcode::ADDI, {4}, 0);
    Instruction b = make_ins(Opcode::BRA, {}, 0, "A");
    b.label = "B";
    auto mp = resolve({a, filler, b});
    CHECK(mp.branch_offset[0] == 2);
    CHECK(mp.branch_offset[2] == -2);
}

TEST_CASE("undefined and duplicate labels are rejected") {
    CHECK_THROWS_AS(resolve(parse_pal("BRA nowhere")), PisaError);
    CHECK_THROWS_AS(resolve(parse_pal("l: START\nl: FINISH")), PisaError);
}

TEST_CASE("instruction inversion follows the inversion table") {
    CHECK(invert_instruction(make_ins(Opcode::ADD, {1, 2})).op == Opcode::SUB);
    CHECK(invert_instruction(make_ins(Opcode::SUB, {1, 2})).op == Opcode::ADD);
    CHECK(invert_instruction(make_ins(Opcode::ADDI, {4}, 5)).imm == -5);
    CHECK(invert_instruction(make_ins(Opcode::RL, {4}, 3)).op == Opcode::RR);
    CHECK(invert_instruction(make_ins(Opcode::RR, {4}, 3)).op == Opcode::RL);
    CHECK(invert_instruction(make_ins(Opcode::RLV, {4, 5})).op == Opcode::RRV);
    CHECK(invert_instruction(make_ins(Opcode::RRV, {4, 5})).op == Opcode::RLV);
    // Everything else is self-inverse.
    CHECK(invert_instruction(make_ins(Opcode::XOR, {1, 2})) == make_ins(Opcode::XOR, {1, 2}));
    CHECK(invert_instruction(make_ins(Opcode::EXCH, {1, 2})) == make_ins(Opcode::EXCH, {1, 2}));
    CHECK(invert_instruction(make_ins(Opcode::BRA, {}, 0, "l")) ==
          make_ins(Opcode::BRA, {}, 0, "l"));
}

TEST_CASE("instruction inversion is an involution across every variant") {
    std::mt19937 rng(11);
    for (int variant = 0; variant < 34; ++variant) {
        auto op = static_cast<Opcode>(variant);
        Instruction ins;
        ins.op = op;
        for (int i = 0; i < 3; ++i)
            ins.regs[static_cast<std::size_t>(i)] = static_cast<int>(rng() % 32);
        ins.imm = static_cast<std::int32_t>(rng());
        if (shape(op).label)
            ins.target = "t";
        CHECK(invert_instruction(invert_instruction(ins)) == ins);
    }
}

TEST_CASE("resolve is stable under label insertion") {
    // Inserting an extra labeled no-op shifts only offsets that cross it,
    // by exactly the inserted distance.
    auto text = R"(START
a: BEQ $4 $0 b
ADDI $4 1
b: BEQ $4 $0 a
c: BRA d
d: BRA c
FINISH
)";
    auto base = parse_pal(text);
    auto resolved = resolve(base);

    for (std::size_t pos = 1; pos < base.size(); ++pos) {
        auto modified = base;
        Instruction nop = make_ins(Opcode::XORI, {4}, 0);
        nop.label = "inserted";
        modified.insert(modified.begin() + static_cast<std::ptrdiff_t>(pos), nop);
        auto shifted = resolve(modified);
        for (std::size_t i = 0; i < base.size(); ++i) {
            if (!base[i].is_branch())
                continue;
            std::size_t new_i = i < pos ? i : i + 1;
            std::int64_t src = static_cast<std::int64_t>(i);
            std::int64_t dst = src + resolved.branch_offset[i];
            bool crosses = (src < static_cast<std::int64_t>(pos) &&
                            dst >= static_cast<std::int64_t>(pos)) ||
                           (dst < static_cast<std::int64_t>(pos) &&
                            src >= static_cast<std::int64_t>(pos));
            std::int32_t expected = resolved.branch_offset[i];
            if (crosses)
                expected += resolved.branch_offset[i] > 0 ? 1 : -1;
            CHECK(shifted.branch_offset[new_i] == expected);
        }
    }
}
