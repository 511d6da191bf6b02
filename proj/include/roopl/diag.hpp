#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace roopl {

struct SourceLoc {
    int line = 0;   // 1-based, 0 = unknown
    int column = 0; // 1-based

    bool known() const { return line > 0; }
    bool operator==(const SourceLoc&) const = default;
};

inline std::string to_string(SourceLoc loc) {
    return std::to_string(loc.line) + ":" + std::to_string(loc.column);
}

// One reported problem. `rule` carries the violated typing/analysis rule
// name (e.g. "T-AssVar") when there is one.
struct Diagnostic {
    SourceLoc loc;
    std::string rule;
    std::string message;

    std::string render(const std::string& file = "<input>") const {
        std::ostringstream out;
        out << file << ":" << loc.line << ":" << loc.column << ": " << message;
        if (!rule.empty())
            out << " [" << rule << "]";
        return out.str();
    }

    bool operator==(const Diagnostic&) const = default;
};

// Lexing and parsing stop at the first error.
struct LexError : std::runtime_error {
    SourceLoc loc;
    LexError(SourceLoc l, const std::string& msg) : std::runtime_error(msg), loc(l) {}
};

struct ParseError : std::runtime_error {
    SourceLoc loc;
    ParseError(SourceLoc l, const std::string& msg) : std::runtime_error(msg), loc(l) {}
};

} // namespace roopl
