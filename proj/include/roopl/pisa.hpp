#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace roopl::pisa {

enum class Opcode {
    ADD, ADDI, ANDX, ANDIX, NORX, NEG, ORX, ORIX, RL, RLV, RR, RRV,
    SLLX, SLLVX, SRAX, SRAVX, SRLX, SRLVX, SUB, XOR, XORI,
    BEQ, BGEZ, BGTZ, BLEZ, BLTZ, BNE, BRA, EXCH, SWAPBR, RBRA,
    START, FINISH, DATA,
};

// Operand shape of each mnemonic: number of registers, immediate, label.
struct OpShape {
    const char* name;
    int regs;
    bool imm;
    bool label;
};

inline const OpShape& shape(Opcode op) {
    // ORIX takes an immediate like ANDIX; the grammar's third register is
    // inconsistent with the mnemonic and the ANDIX/ORIX pairing.
    static const std::array<OpShape, 34> shapes = {{
        {"ADD", 2, false, false},   {"ADDI", 1, true, false},  {"ANDX", 3, false, false},
        {"ANDIX", 2, true, false},  {"NORX", 3, false, false}, {"NEG", 1, false, false},
        {"ORX", 3, false, false},   {"ORIX", 2, true, false},  {"RL", 1, true, false},
        {"RLV", 2, false, false},   {"RR", 1, true, false},    {"RRV", 2, false, false},
        {"SLLX", 2, true, false},   {"SLLVX", 3, false, false},{"SRAX", 2, true, false},
        {"SRAVX", 3, false, false}, {"SRLX", 2, true, false},  {"SRLVX", 3, false, false},
        {"SUB", 2, false, false},   {"XOR", 2, false, false},  {"XORI", 1, true, false},
        {"BEQ", 2, false, true},    {"BGEZ", 1, false, true},  {"BGTZ", 1, false, true},
        {"BLEZ", 1, false, true},   {"BLTZ", 1, false, true},  {"BNE", 2, false, true},
        {"BRA", 0, false, true},    {"EXCH", 2, false, false}, {"SWAPBR", 1, false, false},
        {"RBRA", 0, false, true},   {"START", 0, false, false},{"FINISH", 0, false, false},
        {"DATA", 0, true, false},
    }};
    return shapes[static_cast<std::size_t>(op)];
}

inline std::optional<Opcode> opcode_from_name(std::string_view name) {
    for (int i = 0; i < 34; ++i)
        if (shape(static_cast<Opcode>(i)).name == name)
            return static_cast<Opcode>(i);
    return std::nullopt;
}

struct Instruction {
    Opcode op = Opcode::START;
    std::array<int, 3> regs{0, 0, 0};
    std::int32_t imm = 0;
    std::string target;  // branch label
    std::string label;   // optional leading label of this line
    std::string comment; // without the leading ';'

    bool is_branch() const { return shape(op).label; }
    bool operator==(const Instruction& other) const {
        return op == other.op && regs == other.regs && imm == other.imm &&
               target == other.target && label == other.label;
    }
};

inline Instruction make_ins(Opcode op, std::initializer_list<int> regs = {},
                            std::int32_t imm = 0, std::string target = {},
                            std::string comment = {}) {
    Instruction i;
    i.op = op;
    int n = 0;
    for (int r : regs)
        i.regs[static_cast<std::size_t>(n++)] = r;
    i.imm = imm;
    i.target = std::move(target);
    i.comment = std::move(comment);
    return i;
}

struct PisaError : std::runtime_error {
    int line;
    PisaError(int l, const std::string& msg) : std::runtime_error(msg), line(l) {}
};

// Inversion table: ADD<->SUB, ADDI negates, RL<->RR, RLV<->RRV; the rest are
// self-inverse.
inline Instruction invert_instruction(const Instruction& ins) {
    Instruction out = ins;
    switch (ins.op) {
    case Opcode::ADD: out.op = Opcode::SUB; break;
    case Opcode::SUB: out.op = Opcode::ADD; break;
    case Opcode::ADDI:
        out.imm = static_cast<std::int32_t>(
            -static_cast<std::uint32_t>(ins.imm)); // negate with wrap
        break;
    case Opcode::RL: out.op = Opcode::RR; break;
    case Opcode::RR: out.op = Opcode::RL; break;
    case Opcode::RLV: out.op = Opcode::RRV; break;
    case Opcode::RRV: out.op = Opcode::RLV; break;
    default: break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Textual PAL

inline std::string to_string(const Instruction& ins) {
    std::ostringstream out;
    if (!ins.label.empty())
        out << ins.label << ": ";
    const OpShape& s = shape(ins.op);
    out << s.name;
    for (int r = 0; r < s.regs; ++r)
        out << " $" << ins.regs[static_cast<std::size_t>(r)];
    if (s.imm)
        out << " " << ins.imm;
    if (s.label)
        out << " " << ins.target;
    if (!ins.comment.empty())
        out << " ; " << ins.comment;
    return out.str();
}

inline std::string emit_pal(const std::vector<Instruction>& program) {
    std::ostringstream out;
    for (const auto& ins : program)
        out << to_string(ins) << "\n";
    return out.str();
}

namespace detail {

inline std::vector<std::string> split_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) {
                tokens.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty())
        tokens.push_back(cur);
    return tokens;
}

inline int parse_register(const std::string& tok, int line) {
    std::string digits;
    if (tok.size() >= 2 && (tok[0] == '$' || tok[0] == 'r'))
        digits = tok.substr(1);
    else
        throw PisaError(line, "bad register name '" + tok + "'");
    for (char c : digits)
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw PisaError(line, "bad register name '" + tok + "'");
    int n = std::stoi(digits);
    if (n < 0 || n > 31)
        throw PisaError(line, "register index out of range in '" + tok + "'");
    return n;
}

inline std::int32_t parse_immediate(const std::string& tok, int line) {
    std::size_t pos = 0;
    bool neg = false;
    if (pos < tok.size() && (tok[pos] == '+' || tok[pos] == '-')) {
        neg = tok[pos] == '-';
        ++pos;
    }
    if (pos >= tok.size())
        throw PisaError(line, "bad immediate '" + tok + "'");
    std::int64_t value = 0;
    for (; pos < tok.size(); ++pos) {
        if (!std::isdigit(static_cast<unsigned char>(tok[pos])))
            throw PisaError(line, "bad immediate '" + tok + "'");
        value = value * 10 + (tok[pos] - '0');
        if (value > (1LL << 32))
            throw PisaError(line, "immediate out of range '" + tok + "'");
    }
    if (neg)
        value = -value;
    if (value > 2147483647LL || value < -2147483648LL)
        throw PisaError(line, "immediate does not fit a signed word: '" + tok + "'");
    return static_cast<std::int32_t>(value);
}

} // namespace detail

inline std::vector<Instruction> parse_pal(std::string_view text) {
    std::vector<Instruction> program;
    int line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        std::string comment;
        if (auto semi = line.find(';'); semi != std::string::npos) {
            comment = line.substr(semi + 1);
            if (!comment.empty() && comment.front() == ' ')
                comment.erase(comment.begin());
            line = line.substr(0, semi);
        }
        auto tokens = detail::split_tokens(line);
        if (tokens.empty())
            continue;
        Instruction ins;
        ins.comment = comment;
        std::size_t t = 0;
        if (tokens[t].back() == ':') {
            ins.label = tokens[t].substr(0, tokens[t].size() - 1);
            if (ins.label.empty())
                throw PisaError(line_no, "empty label");
            ++t;
            if (t >= tokens.size())
                throw PisaError(line_no, "label without an instruction");
        }
        auto op = opcode_from_name(tokens[t]);
        if (!op)
            throw PisaError(line_no, "unknown mnemonic '" + tokens[t] + "'");
        ins.op = *op;
        ++t;
        const OpShape& s = shape(ins.op);
        for (int r = 0; r < s.regs; ++r) {
            if (t >= tokens.size())
                throw PisaError(line_no, std::string("missing register operand for ") + s.name);
            ins.regs[static_cast<std::size_t>(r)] = detail::parse_register(tokens[t++], line_no);
        }
        if (s.imm) {
            if (t >= tokens.size())
                throw PisaError(line_no, std::string("missing immediate operand for ") + s.name);
            ins.imm = detail::parse_immediate(tokens[t++], line_no);
        }
        if (s.label) {
            if (t >= tokens.size())
                throw PisaError(line_no, std::string("missing branch target for ") + s.name);
            ins.target = tokens[t++];
        }
        if (t != tokens.size())
            throw PisaError(line_no, "trailing operands after " + std::string(s.name));
        program.push_back(std::move(ins));
    }
    return program;
}

// ---------------------------------------------------------------------------
// Label resolution: one instruction or DATA word per address, from 0.

struct MachineProgram {
    std::vector<Instruction> code;
    std::map<std::string, std::int32_t> label_address;
    // Per instruction: target offset (address(target) - address(branch));
    // zero for non-branch instructions.
    std::vector<std::int32_t> branch_offset;

    std::int32_t size() const { return static_cast<std::int32_t>(code.size()); }
};

inline MachineProgram resolve(std::vector<Instruction> program) {
    MachineProgram out;
    out.code = std::move(program);
    for (std::size_t addr = 0; addr < out.code.size(); ++addr) {
        const std::string& label = out.code[addr].label;
        if (label.empty())
            continue;
        if (!out.label_address.emplace(label, static_cast<std::int32_t>(addr)).second)
            throw PisaError(static_cast<int>(addr), "duplicate label '" + label + "'");
    }
    out.branch_offset.resize(out.code.size(), 0);
    for (std::size_t addr = 0; addr < out.code.size(); ++addr) {
        const Instruction& ins = out.code[addr];
        if (!ins.is_branch())
            continue;
        auto it = out.label_address.find(ins.target);
        if (it == out.label_address.end())
            throw PisaError(static_cast<int>(addr), "undefined label '" + ins.target + "'");
        out.branch_offset[addr] = it->second - static_cast<std::int32_t>(addr);
    }
    return out;
}

} // namespace roopl::pisa
