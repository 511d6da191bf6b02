#pragma once

// Shared helpers for the test suites: corpus loading, the front-to-back
// pipeline, independent oracles and a random well-typed statement generator.

#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "roopl/class_model.hpp"
#include "roopl/desugar.hpp"
#include "roopl/interp.hpp"
#include "roopl/parser.hpp"
#include "roopl/type_check.hpp"

namespace testsupport {

using namespace roopl;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline std::string program_path(const std::string& name) {
    return std::string(ROOPL_PROGRAM_DIR) + "/" + name;
}

inline const std::vector<std::string>& corpus_names() {
    static const std::vector<std::string> names = {
        "objectdemo", "fibpair", "date", "linkedlist", "rtm_increment",
    };
    return names;
}

// Owns the program and its derived model together.
struct Pipeline {
    Program parsed;
    Program core;
    ClassModel model;
    std::vector<Diagnostic> diags;

    bool ok() const { return diags.empty(); }
};

inline std::shared_ptr<Pipeline> pipeline_from_source(const std::string& source) {
    auto p = std::make_shared<Pipeline>();
    p->parsed = parse_source(source);
    p->core = desugar(p->parsed);
    auto model = build_class_model(p->core, p->diags);
    if (!model)
        return p;
    p->model = std::move(*model);
    auto type_diags = check_program(p->model, p->core);
    p->diags.insert(p->diags.end(), type_diags.begin(), type_diags.end());
    return p;
}

inline std::shared_ptr<Pipeline> pipeline_from_corpus(const std::string& name) {
    return pipeline_from_source(read_file(program_path(name + ".rpl")));
}

// expected.txt files: one "name = value" line per main-class field.
inline std::vector<std::pair<std::string, std::int32_t>> read_expected(const std::string& name) {
    std::vector<std::pair<std::string, std::int32_t>> out;
    std::istringstream in(read_file(program_path(name + ".expected.txt")));
    std::string field, eq;
    long long value;
    while (in >> field >> eq >> value)
        out.emplace_back(field, static_cast<std::int32_t>(value));
    return out;
}

inline std::int64_t value_as_number(const Value& v) {
    return v.is_obj() ? -1 : v.as_number();
}

// ---------------------------------------------------------------------------
// Oracles (independent of the implementation paths they check)

// Fibonacci pair by direct recurrence: (a, b) <- (b, a + b), n times from (1, 1).
inline std::pair<long long, long long> fib_pair_oracle(int n) {
    long long a = 1, b = 1;
    for (int i = 0; i < n; ++i) {
        long long next = a + b;
        a = b;
        b = next;
    }
    return {a, b};
}

// Gauss sum 1 + 2 + ... + n.
inline long long gauss_oracle(int n) {
    return static_cast<long long>(n) * (n + 1) / 2;
}

// Toy calendar oracle: every month has 31 days.
inline std::pair<int, int> date_oracle(int day, int month, int advances) {
    for (int i = 0; i < advances; ++i) {
        if (day == 31) {
            day = 1;
            ++month;
        } else {
            ++day;
        }
    }
    return {day, month};
}

// Direct quadruple-TM stepper. Rules are (q1, s1, s2, q2) with s1 == slash
// marking a shift rule whose s2 is one of left/right.
struct TmRule {
    int q1, s1, s2, q2;
};

struct TmOracle {
    int slash = 5, left = 10, right = 11, blank = 0;

    // Returns the final tape (trimmed of nothing; grows as needed).
    std::vector<int> run(const std::vector<TmRule>& rules, std::vector<int> tape, int state,
                         int final_state, int max_steps) const {
        int pos = 0;
        for (int step = 0; state != final_state; ++step) {
            if (step > max_steps)
                throw std::runtime_error("TM oracle exceeded step limit");
            bool fired = false;
            for (const auto& r : rules) {
                if (r.q1 != state)
                    continue;
                if (r.s1 == slash) {
                    state = r.q2;
                    pos += r.s2 == right ? 1 : -1;
                    if (pos < 0) {
                        tape.insert(tape.begin(), blank);
                        pos = 0;
                    } else if (pos >= static_cast<int>(tape.size())) {
                        tape.push_back(blank);
                    }
                    fired = true;
                    break;
                }
                if (r.s1 == tape[static_cast<std::size_t>(pos)]) {
                    tape[static_cast<std::size_t>(pos)] = r.s2;
                    state = r.q2;
                    fired = true;
                    break;
                }
            }
            if (!fired)
                throw std::runtime_error("TM oracle stuck");
        }
        return tape;
    }
};

// Determinism checks from the reversible-TM definition: every pair of
// distinct quadruples must satisfy both conditions.
inline std::vector<std::string> check_rtm_rules(const std::vector<TmRule>& rules,
                                                int slash = 5) {
    std::vector<std::string> violations;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        for (std::size_t j = i + 1; j < rules.size(); ++j) {
            const auto& a = rules[i];
            const auto& b = rules[j];
            if (a.q1 == b.q1 && (a.s1 == slash || b.s1 == slash || a.s1 == b.s1))
                violations.push_back("forward determinism: rules " + std::to_string(i) + " and " +
                                     std::to_string(j));
            if (a.q2 == b.q2 && (a.s1 == slash || b.s1 == slash || a.s2 == b.s2))
                violations.push_back("backward determinism: rules " + std::to_string(i) +
                                     " and " + std::to_string(j));
        }
    }
    return violations;
}

// ---------------------------------------------------------------------------
// Random well-typed statement generator over a fixed two-class model.
//
// The model:   class Holder { int u; int v; method bump(int k) ... }
//              class Main   { int a; int b; int c; method main() ... }
// Statements are generated against Main's field environment. Execution-safe
// mode only produces forms whose assertions hold by construction, so the
// round-trip tests do not reject samples.

inline const char* kGeneratorModelSource = R"(
class Holder
    int u
    int v

    method bump(int k)
        u += k

    method flip(int k)
        v ^= k
        u -= 1

class Main
    int a
    int b
    int c

    method poke(int k)
        k += 1
        a ^= k
        a ^= k
        k -= 1

    method main()
        skip
)";

struct GenOptions {
    bool execution_safe = true; // assertions hold by construction
    int max_depth = 5;
};

class StmtGen {
public:
    using Options = GenOptions;

    StmtGen(unsigned seed, Options opts = {}) : rng_(seed), opts_(opts) {}

    // Variables in scope: Main's int fields plus generated locals/objects.
    StmtSeq sequence(int depth, int length) {
        StmtSeq seq;
        for (int i = 0; i < length; ++i)
            seq.push_back(statement(depth));
        return seq;
    }

    Statement statement(int depth) {
        int max_pick = depth > 0 ? 10 : 4;
        switch (rng_() % max_pick) {
        case 0: return make_stmt(Statement::Skip{});
        case 1:
        case 2: return assign();
        case 3: return swap();
        case 4:
        case 5: return if_stmt(depth);
        case 6: return local_block(depth);
        case 7: return counting_loop(depth);
        case 8: return object_block(depth);
        default: return assign();
        }
    }

private:
    std::mt19937 rng_;
    Options opts_;
    std::vector<std::string> int_vars_{"a", "b", "c"};
    int fresh_ = 0;

    std::int32_t small_const() { return static_cast<std::int32_t>(rng_() % 9) - 4; }

    std::string pick_int_var() {
        if (int_vars_.empty())
            return "a"; // always bound in the generator model
        return int_vars_[rng_() % int_vars_.size()];
    }

    // Integer expression over the in-scope variables, possibly excluding one.
    ExprPtr int_expr(int depth, const std::string& exclude = "") {
        if (depth <= 0 || rng_() % 3 == 0) {
            if (rng_() % 2 == 0)
                return make_const(small_const());
            for (int tries = 0; tries < 8; ++tries) {
                std::string v = pick_int_var();
                if (v != exclude)
                    return make_var(v);
            }
            return make_const(small_const());
        }
        static const BinOp ops[] = {BinOp::Add, BinOp::Sub, BinOp::Xor,    BinOp::BitAnd,
                                    BinOp::BitOr, BinOp::Lt, BinOp::Le,    BinOp::Gt,
                                    BinOp::Ge,  BinOp::Eq,  BinOp::Ne,    BinOp::LogAnd,
                                    BinOp::LogOr, BinOp::Mul};
        BinOp op = ops[rng_() % (sizeof(ops) / sizeof(ops[0]))];
        return make_binary(op, int_expr(depth - 1, exclude), int_expr(depth - 1, exclude));
    }

    Statement assign() {
        std::string target = pick_int_var();
        ModOp ops[] = {ModOp::Add, ModOp::Sub, ModOp::Xor};
        return make_stmt(Statement::Assign{target, ops[rng_() % 3], int_expr(2, target)});
    }

    Statement swap() {
        return make_stmt(Statement::Swap{pick_int_var(), pick_int_var()});
    }

    // if e then s1 else s2 fi e with bodies that do not write vars(e): the
    // assertion then holds on both paths.
    Statement if_stmt(int depth) {
        Statement::If node;
        node.has_else = true;
        if (opts_.execution_safe) {
            std::string guard_var = pick_int_var();
            ExprPtr guard = make_binary(rng_() % 2 == 0 ? BinOp::Lt : BinOp::Ge,
                                        make_var(guard_var), make_const(small_const()));
            node.entry = guard;
            node.exit = guard;
            auto saved = int_vars_;
            int_vars_.clear();
            for (const auto& v : saved)
                if (v != guard_var)
                    int_vars_.push_back(v);
            if (int_vars_.empty())
                int_vars_.push_back(guard_var); // degenerate; guard untouched below
            bool degenerate = int_vars_.size() == 1 && int_vars_[0] == guard_var;
            node.then_branch = degenerate ? StmtSeq{make_stmt(Statement::Skip{})}
                                          : sequence(depth - 1, 1 + rng_() % 2);
            node.else_branch = degenerate ? StmtSeq{make_stmt(Statement::Skip{})}
                                          : sequence(depth - 1, 1 + rng_() % 2);
            int_vars_ = saved;
        } else {
            node.entry = int_expr(2);
            node.exit = int_expr(2);
            node.then_branch = sequence(depth - 1, 1 + rng_() % 2);
            node.else_branch = sequence(depth - 1, 1 + rng_() % 2);
        }
        return make_stmt(std::move(node));
    }

    // local int t = 0  from t = 0 do [body; t += 1] loop skip until t = k
    // delocal t = k: a loop that always runs exactly k iterations.
    Statement counting_loop(int depth) {
        if (!opts_.execution_safe) {
            Statement::Loop node;
            node.entry = int_expr(2);
            node.exit = int_expr(2);
            node.do_body = sequence(depth - 1, 1);
            node.loop_body = sequence(depth - 1, 1);
            return make_stmt(std::move(node));
        }
        std::string t = "t" + std::to_string(fresh_++);
        int iterations = 1 + static_cast<int>(rng_() % 3);
        Statement::Loop loop;
        loop.entry = make_binary(BinOp::Eq, make_var(t), make_const(0));
        loop.exit = make_binary(BinOp::Eq, make_var(t), make_const(iterations));
        // The body never sees the counter, so the iteration count is exact.
        StmtSeq body = sequence(depth - 1, 1);
        body.push_back(make_stmt(Statement::Assign{t, ModOp::Add, make_const(1)}));
        loop.do_body = std::move(body);
        loop.loop_body = {make_stmt(Statement::Skip{})};

        Statement::LocalBlock block;
        block.decls = {{t, make_const(0)}};
        block.exits = {{t, make_const(iterations)}};
        block.body = {make_stmt(std::move(loop))};
        return make_stmt(std::move(block));
    }

    Statement local_block(int depth) {
        std::string t = "t" + std::to_string(fresh_++);
        Statement::LocalBlock block;
        if (opts_.execution_safe) {
            // The body cannot reach t, so a constant initializer always
            // matches the identical delocal expression.
            ExprPtr c = make_const(small_const());
            block.decls = {{t, c}};
            block.exits = {{t, c}};
            block.body = sequence(depth - 1, 1 + rng_() % 2);
            if (rng_() % 2 == 0) {
                // Exercise the local calling convention with the net-zero
                // helper: t is a local, so it is a permitted argument.
                Statement::Invocation call;
                call.method = "poke";
                call.args = {make_var(t)};
                Statement::Invocation uncall = call;
                uncall.is_uncall = true;
                bool reversed = rng_() % 2 == 0;
                block.body.insert(block.body.begin(), make_stmt(reversed ? uncall : call));
                block.body.push_back(make_stmt(reversed ? call : uncall));
            }
        } else {
            block.decls = {{t, int_expr(2, t)}};
            int_vars_.push_back(t);
            block.body = sequence(depth - 1, 1 + rng_() % 2);
            int_vars_.pop_back();
            block.exits = {{t, int_expr(2, t)}};
        }
        return make_stmt(std::move(block));
    }

    // construct Holder h ... destruct h with balanced mutations through
    // call/uncall pairs, leaving the object fields zero.
    Statement object_block(int depth) {
        std::string h = "h" + std::to_string(fresh_++);
        Statement::ObjectBlock block;
        block.class_name = "Holder";
        block.var = h;

        std::string arg = pick_int_var();
        Statement::Invocation call;
        call.callee = h;
        call.method = rng_() % 2 == 0 ? "bump" : "flip";
        call.args = {make_var(arg)};
        Statement::Invocation uncall = call;
        uncall.is_uncall = true;

        // The sandwiched statements must not write the argument, or the
        // uncall would not rebalance the object fields.
        auto saved = int_vars_;
        if (opts_.execution_safe) {
            int_vars_.clear();
            for (const auto& v : saved)
                if (v != arg)
                    int_vars_.push_back(v);
        }
        StmtSeq inner = opts_.execution_safe && int_vars_.empty()
                            ? StmtSeq{make_stmt(Statement::Skip{})}
                            : sequence(depth - 1, 1);
        int_vars_ = saved;
        StmtSeq body;
        body.push_back(make_stmt(call));
        for (auto& s : inner)
            body.push_back(std::move(s));
        body.push_back(make_stmt(uncall));
        block.body = std::move(body);
        return make_stmt(std::move(block));
    }
};

// Instantiates the bundled reversible-TM simulator for a given rule table
// and input tape (the committed rtm_increment.rpl is one such instance).
// The simulator's output encoding is the sum of all tape symbols, which for
// the {0,1} alphabet is the unary value of the tape.
inline std::string rtm_source(const std::vector<TmRule>& rules, const std::vector<int>& tape,
                              int q_start, int q_final) {
    std::string tmpl = read_file(program_path("rtm_increment.rpl"));

    // Reuse everything up to Machine::main verbatim.
    auto cut = tmpl.find("    method main()");
    std::string out = tmpl.substr(0, cut);

    auto rule_args = [&](std::size_t num) { // 1-based
        const auto& r = rules[num - 1];
        std::string next = num == rules.size() ? "norule" : "r" + std::to_string(num + 1);
        std::ostringstream s;
        s << r.q1 << ", ";
        if (r.s1 == 5) // shift rule: use the symbolic sentinel names
            s << "SLASH, " << (r.s2 == 10 ? "LEFT" : "RIGHT");
        else
            s << r.s1 << ", " << r.s2;
        s << ", " << r.q2 << ", " << next;
        return s.str();
    };
    auto cell_args = [&](std::size_t num) { // 1-based; c1 is the tape head
        std::string next = num == tape.size() ? "empty" : "c" + std::to_string(num + 1);
        return std::to_string(tape[num - 1]) + ", " + next;
    };
    auto pad = [&](int n) { return std::string(static_cast<std::size_t>(4 * n), ' '); };

    std::ostringstream main;
    main << "    method main()\n";
    main << "        SLASH += 5\n        LEFT += 10\n        RIGHT += 11\n";
    main << "        Qf += " << q_final << "\n";
    main << "        PCMAX += " << rules.size() << "\n";
    int indent = 2;
    // Blocks nest outermost-last-element-first, unwinding innermost-first.
    for (std::size_t num = rules.size(); num >= 1; --num)
        main << pad(indent++) << "construct Rule r" << num << "(" << rule_args(num) << ")\n";
    main << pad(indent) << "rules <=> r1\n";
    for (std::size_t num = tape.size(); num >= 1; --num)
        main << pad(indent++) << "construct Cell c" << num << "(" << cell_args(num) << ")\n";
    main << pad(indent) << "local int pos = 0, state = " << q_start << ", pc = PCMAX - 1\n";
    main << pad(indent + 1) << "call simulate(c1, pos, state, pc)\n";
    main << pad(indent) << "delocal pos = 0, state = " << q_start << ", pc = PCMAX - 1\n";
    for (std::size_t num = 1; num <= tape.size(); ++num)
        main << pad(--indent) << "destruct c" << num << "(" << cell_args(num) << ")\n";
    main << pad(indent) << "rules <=> r1\n";
    for (std::size_t num = 1; num <= rules.size(); ++num)
        main << pad(--indent) << "destruct r" << num << "(" << rule_args(num) << ")\n";
    return out + main.str();
}

inline std::shared_ptr<Pipeline> generator_pipeline() {
    static std::shared_ptr<Pipeline> p = pipeline_from_source(kGeneratorModelSource);
    return p;
}

// Interpreter harness over the generator model: fields a, b, c live at
// locations 1..3 with the Main object at 4, mirroring rule Main.
struct GenHarness {
    std::shared_ptr<Pipeline> pipe = generator_pipeline();
    Interpreter interp;
    Env env;
    Location this_loc = 4;

    explicit GenHarness(std::int32_t a, std::int32_t b, std::int32_t c,
                        InterpreterOptions opts = {})
        : interp(pipe->model, opts) {
        env = {{"a", 1}, {"b", 2}, {"c", 3}};
        interp.store()[1] = Value(a);
        interp.store()[2] = Value(b);
        interp.store()[3] = Value(c);
        interp.store()[4] = Value(ObjVal{"Main", env});
        interp.reserve_locations(5);
    }

    void exec(const StmtSeq& seq) { interp.exec_seq(this_loc, env, seq); }
};

// Type environment matching the harness scope.
inline TypeEnv generator_env() {
    TypeEnv env;
    env.bind_in_place("a", Type::integer());
    env.bind_in_place("b", Type::integer());
    env.bind_in_place("c", Type::integer());
    return env;
}

} // namespace testsupport
