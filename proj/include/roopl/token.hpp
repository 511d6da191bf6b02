#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "roopl/diag.hpp"

namespace roopl {

enum class TokenKind {
    Keyword,
    Identifier,
    IntLiteral,
    Operator,
    Punct,
    EndOfInput,
};

struct Token {
    TokenKind kind = TokenKind::EndOfInput;
    std::string lexeme;
    SourceLoc loc;

    bool is(TokenKind k) const { return kind == k; }
    bool is(TokenKind k, std::string_view text) const { return kind == k && lexeme == text; }
    bool is_keyword(std::string_view kw) const { return is(TokenKind::Keyword, kw); }
};

inline const std::array<std::string_view, 21>& keywords() {
    static const std::array<std::string_view, 21> kws = {
        "class", "inherits", "method", "call", "uncall", "construct", "destruct",
        "skip", "from", "do", "loop", "until", "int", "nil", "if", "then", "else",
        "fi", "local", "delocal", "reversal",
    };
    return kws;
}

inline bool is_keyword(std::string_view word) {
    for (auto kw : keywords())
        if (kw == word)
            return true;
    return false;
}

inline bool is_identifier(std::string_view word) {
    if (word.empty() || is_keyword(word))
        return false;
    if (!std::isalpha(static_cast<unsigned char>(word[0])) && word[0] != '_')
        return false;
    for (char c : word)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
            return false;
    return true;
}

// Multi-character operators first so maximal munch picks them over prefixes.
inline const std::vector<std::string_view>& operator_lexemes() {
    static const std::vector<std::string_view> ops = {
        "<=>", "+=", "-=", "^=", "&&", "||", "<=", ">=", "!=",
        "+", "-", "^", "*", "/", "%", "&", "|", "<", ">", "=",
    };
    return ops;
}

inline std::vector<Token> tokenize(std::string_view source) {
    std::vector<Token> tokens;
    int line = 1;
    int column = 1;
    std::size_t pos = 0;

    auto advance = [&](std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            if (source[pos + i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        pos += n;
    };

    while (pos < source.size()) {
        char c = source[pos];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            advance(1);
            continue;
        }
        if (c == '/' && pos + 1 < source.size() && source[pos + 1] == '/') {
            while (pos < source.size() && source[pos] != '\n')
                advance(1);
            continue;
        }

        SourceLoc loc{line, column};
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t end = pos;
            while (end < source.size() && std::isdigit(static_cast<unsigned char>(source[end])))
                ++end;
            std::string lit(source.substr(pos, end - pos));
            // Non-negative decimal fitting a signed 32-bit word.
            if (lit.size() > 10 || (lit.size() == 10 && lit > "2147483647"))
                throw LexError(loc, "integer literal '" + lit + "' does not fit 32 bits");
            tokens.push_back({TokenKind::IntLiteral, lit, loc});
            advance(end - pos);
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t end = pos;
            while (end < source.size() &&
                   (std::isalnum(static_cast<unsigned char>(source[end])) || source[end] == '_'))
                ++end;
            std::string word(source.substr(pos, end - pos));
            tokens.push_back({is_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier,
                              word, loc});
            advance(end - pos);
            continue;
        }
        if (c == '(' || c == ')' || c == ',') {
            tokens.push_back({TokenKind::Punct, std::string(1, c), loc});
            advance(1);
            continue;
        }
        if (c == ':' && pos + 1 < source.size() && source[pos + 1] == ':') {
            tokens.push_back({TokenKind::Punct, "::", loc});
            advance(2);
            continue;
        }

        bool matched = false;
        for (auto op : operator_lexemes()) {
            if (source.substr(pos, op.size()) == op) {
                tokens.push_back({TokenKind::Operator, std::string(op), loc});
                advance(op.size());
                matched = true;
                break;
            }
        }
        if (matched)
            continue;

        throw LexError(loc, std::string("illegal character '") + c + "'");
    }

    tokens.push_back({TokenKind::EndOfInput, "", {line, column}});
    return tokens;
}

} // namespace roopl
