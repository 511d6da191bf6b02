// roopl: command line driver for the ROOPL toolchain. Subcommands cover the
// whole pipeline: check, invert, run (reference interpreter), compile (to
// PAL), simulate (PISA virtual machine) and exec (compile, simulate and
// compare against the interpreter).

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <pthread.h>

#include <CLI11.hpp>

#include "roopl/class_model.hpp"
#include "roopl/codegen.hpp"
#include "roopl/desugar.hpp"
#include "roopl/interp.hpp"
#include "roopl/invert.hpp"
#include "roopl/parser.hpp"
#include "roopl/pisa.hpp"
#include "roopl/pretty.hpp"
#include "roopl/type_check.hpp"
#include "roopl/vm.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitStatic = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitDivergence = 3;

std::string read_input(const std::string& path) {
    if (path == "-") {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        return buf.str();
    }
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
}

struct Front {
    roopl::Program parsed;
    roopl::Program core;
    roopl::ClassModel model;
};

// Parses, desugars, builds the class model and type checks. Throws nothing;
// returns nullopt after printing diagnostics when the program is rejected.
std::optional<Front> analyze(const std::string& path, const std::string& source) {
    const std::string& file = path == "-" ? "<stdin>" : path;
    Front front;
    try {
        front.parsed = roopl::parse_source(source);
    } catch (const roopl::LexError& e) {
        std::cerr << file << ":" << e.loc.line << ":" << e.loc.column << ": " << e.what()
                  << "\n";
        return std::nullopt;
    } catch (const roopl::ParseError& e) {
        std::cerr << file << ":" << e.loc.line << ":" << e.loc.column << ": " << e.what()
                  << "\n";
        return std::nullopt;
    }
    front.core = roopl::desugar(front.parsed);
    std::vector<roopl::Diagnostic> diags;
    auto model = roopl::build_class_model(front.core, diags);
    if (model) {
        front.model = std::move(*model);
        auto type_diags = roopl::check_program(front.model, front.core);
        diags.insert(diags.end(), type_diags.begin(), type_diags.end());
    }
    if (!diags.empty()) {
        for (const auto& d : diags)
            std::cerr << d.render(file) << "\n";
        return std::nullopt;
    }
    return front;
}

// Deep recursion in interpreted programs maps onto native recursion, so the
// interpreter runs on a thread with a large stack reservation.
int on_big_stack(const std::function<int()>& body) {
    struct Call {
        const std::function<int()>* fn = nullptr;
        int result = kExitRuntime;
        std::exception_ptr error;
    } call;
    call.fn = &body;

    pthread_attr_t attr;
    pthread_attr_init(&attr);
    pthread_attr_setstacksize(&attr, std::size_t{1} << 30);
    pthread_t thread;
    auto trampoline = [](void* raw) -> void* {
        auto* c = static_cast<Call*>(raw);
        try {
            c->result = (*c->fn)();
        } catch (...) {
            c->error = std::current_exception();
        }
        return nullptr;
    };
    if (pthread_create(&thread, &attr, trampoline, &call) != 0) {
        pthread_attr_destroy(&attr);
        return body(); // fall back to the current stack
    }
    pthread_join(thread, nullptr);
    pthread_attr_destroy(&attr);
    if (call.error)
        std::rethrow_exception(call.error);
    return call.result;
}

using OutputMap = std::vector<std::pair<std::string, std::int64_t>>;

void print_outputs(const OutputMap& outputs, bool json) {
    if (json) {
        std::cout << "{";
        for (std::size_t i = 0; i < outputs.size(); ++i) {
            if (i)
                std::cout << ", ";
            std::cout << "\"" << outputs[i].first << "\": " << outputs[i].second;
        }
        std::cout << "}\n";
        return;
    }
    for (const auto& [name, value] : outputs)
        std::cout << name << " = " << value << "\n";
}

std::optional<OutputMap> interpret(const Front& front, long long max_depth, bool trace) {
    roopl::InterpreterOptions opts;
    opts.max_call_depth = max_depth;
    opts.trace = trace;
    opts.trace_out = &std::cerr;
    try {
        roopl::Interpreter interp(front.model, opts);
        auto raw = interp.run_program();
        OutputMap out;
        for (const auto& [name, value] : raw)
            out.emplace_back(name, value.is_obj() ? -1 : value.as_number());
        return out;
    } catch (const roopl::RuntimeError& e) {
        std::cerr << "runtime error at " << roopl::to_string(e.loc) << ": " << e.what()
                  << "\n";
        return std::nullopt;
    }
}

struct VmSettings {
    std::uint64_t steps = 100'000'000;
    std::size_t memory = roopl::pisa::kDefaultMemoryWords;
    bool trace = false;
    std::string dump_range;
};

// Runs a resolved machine program; returns the final state or nullopt after
// reporting a trap or step-limit stop.
std::optional<roopl::pisa::MachineState> simulate_program(const roopl::pisa::MachineProgram& mp,
                                                          const VmSettings& vm_opts) {
    try {
        roopl::pisa::Vm vm(mp, vm_opts.memory);
        if (!vm_opts.trace) {
            vm.run(vm_opts.steps);
        } else {
            std::uint64_t executed = 0;
            while (!vm.state().halted) {
                if (executed++ >= vm_opts.steps)
                    throw roopl::pisa::VmError(roopl::pisa::VmError::Kind::StepLimit,
                                               vm.state().pc, "step limit exceeded");
                std::cerr << "[" << vm.state().steps << "] pc=" << vm.state().pc
                          << " br=" << vm.state().br << " dir=" << vm.state().dir << "  "
                          << roopl::pisa::to_string(
                                 mp.code[static_cast<std::size_t>(vm.state().pc)])
                          << "\n";
                vm.step();
            }
        }
        return vm.state();
    } catch (const roopl::pisa::VmError& e) {
        std::cerr << "machine error at address " << e.pc << ": " << e.what() << "\n";
        return std::nullopt;
    }
}

void dump_memory(const roopl::pisa::MachineState& st, const std::string& range) {
    if (range.empty())
        return;
    auto colon = range.find(':');
    std::size_t from = std::stoull(range.substr(0, colon));
    std::size_t to = colon == std::string::npos ? from + 1 : std::stoull(range.substr(colon + 1));
    for (std::size_t addr = from; addr < to && addr < st.memory.size(); ++addr)
        std::cout << addr << ": " << static_cast<std::int32_t>(st.memory[addr]) << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ROOPL toolchain: checker, inverter, interpreter, PISA compiler and VM"};
    app.require_subcommand(1);

    std::string input;
    std::string output;
    bool flag_dump_layout = false;
    bool flag_json = false;
    bool flag_trace = false;
    bool flag_checks = false;
    long long max_depth = 1'000'000;
    VmSettings vm_opts;

    auto add_input = [&](CLI::App* cmd) {
        cmd->add_option("file", input, "input file, or - for standard input")->required();
    };

    auto* cmd_check = app.add_subcommand("check", "parse, analyze and type check a program");
    add_input(cmd_check);
    cmd_check->add_flag("--dump-layout", flag_dump_layout,
                        "print vtable slots and field offsets");

    auto* cmd_invert = app.add_subcommand("invert", "write the inverse program");
    add_input(cmd_invert);
    cmd_invert->add_option("-o,--output", output, "output file (default standard output)");

    auto* cmd_run = app.add_subcommand("run", "interpret a program");
    add_input(cmd_run);
    cmd_run->add_flag("--trace", flag_trace, "trace executed statements to standard error");
    cmd_run->add_flag("--json", flag_json, "print the output map as JSON");
    cmd_run->add_option("--max-depth", max_depth, "maximum call depth")
        ->default_val(1'000'000);

    auto* cmd_compile = app.add_subcommand("compile", "translate a program to PAL");
    add_input(cmd_compile);
    cmd_compile->add_option("-o,--output", output, "output file (default standard output)");
    cmd_compile->add_flag("--runtime-checks", flag_checks, "insert dynamic assertion checks");
    cmd_compile->add_flag("--dump-layout", flag_dump_layout,
                          "print vtable slots and field offsets");

    auto* cmd_simulate = app.add_subcommand("simulate", "run a PAL program on the PISA VM");
    add_input(cmd_simulate);
    cmd_simulate->add_option("--steps", vm_opts.steps, "step limit")->default_val(100'000'000);
    cmd_simulate->add_option("--memory", vm_opts.memory, "memory size in words")
        ->default_val(roopl::pisa::kDefaultMemoryWords);
    cmd_simulate->add_option("--dump-memory", vm_opts.dump_range,
                             "dump the address range a:b after the run");
    cmd_simulate->add_flag("--trace", vm_opts.trace, "trace executed instructions");

    auto* cmd_exec = app.add_subcommand(
        "exec", "compile, simulate and compare against the interpreter");
    add_input(cmd_exec);
    cmd_exec->add_flag("--runtime-checks", flag_checks, "insert dynamic assertion checks");
    cmd_exec->add_flag("--json", flag_json, "print the output map as JSON");
    cmd_exec->add_option("--steps", vm_opts.steps, "step limit")->default_val(100'000'000);
    cmd_exec->add_option("--memory", vm_opts.memory, "memory size in words")
        ->default_val(roopl::pisa::kDefaultMemoryWords);
    cmd_exec->add_option("--max-depth", max_depth, "maximum interpreter call depth")
        ->default_val(1'000'000);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_simulate->parsed()) {
            auto program = roopl::pisa::resolve(roopl::pisa::parse_pal(read_input(input)));
            auto final_state = simulate_program(program, vm_opts);
            if (!final_state)
                return kExitRuntime;
            dump_memory(*final_state, vm_opts.dump_range);
            return kExitOk;
        }

        auto front = analyze(input, read_input(input));
        if (!front)
            return kExitStatic;

        if (cmd_check->parsed()) {
            if (flag_dump_layout)
                std::cout << roopl::dump_layout(front->model, front->core);
            return kExitOk;
        }

        if (cmd_invert->parsed()) {
            write_output(output, roopl::pretty_print(roopl::invert_program(front->core)));
            return kExitOk;
        }

        if (cmd_run->parsed()) {
            return on_big_stack([&] {
                auto outputs = interpret(*front, max_depth, flag_trace);
                if (!outputs)
                    return kExitRuntime;
                print_outputs(*outputs, flag_json);
                return kExitOk;
            });
        }

        if (cmd_compile->parsed()) {
            auto compiled =
                roopl::compile_program(front->model, front->core, {flag_checks});
            if (flag_dump_layout)
                std::cout << roopl::dump_layout(front->model, front->core);
            write_output(output, roopl::pisa::emit_pal(compiled.code));
            return kExitOk;
        }

        // exec: both routes, compared order-insensitively by field name.
        auto compiled = roopl::compile_program(front->model, front->core, {flag_checks});
        return on_big_stack([&] {
            auto interp_out = interpret(*front, max_depth, false);
            if (!interp_out)
                return kExitRuntime;
            auto program = roopl::pisa::resolve(compiled.code);
            auto final_state = simulate_program(program, vm_opts);
            if (!final_state)
                return kExitRuntime;
            if (final_state->regs[31] != 0) {
                std::cerr << "compiled program stopped at the runtime error trap\n";
                return kExitRuntime;
            }
            std::map<std::string, std::int64_t> vm_map;
            for (const auto& [field, addr] : compiled.output_cells)
                vm_map[field] = static_cast<std::int32_t>(
                    final_state->memory[static_cast<std::size_t>(addr)]);
            std::map<std::string, std::int64_t> interp_map(interp_out->begin(),
                                                           interp_out->end());
            if (vm_map != interp_map) {
                std::cerr << "divergence between interpreter and compiled program:\n";
                for (const auto& [field, value] : interp_map)
                    std::cerr << "  interpreter " << field << " = " << value
                              << ", machine " << field << " = " << vm_map[field] << "\n";
                return kExitDivergence;
            }
            print_outputs(*interp_out, flag_json);
            return kExitOk;
        });
    } catch (const roopl::pisa::PisaError& e) {
        std::cerr << input << ":" << e.line << ": " << e.what() << "\n";
        return kExitStatic;
    } catch (const roopl::CodegenError& e) {
        std::cerr << "compile error: " << e.what() << "\n";
        return kExitStatic;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStatic;
    }
}
