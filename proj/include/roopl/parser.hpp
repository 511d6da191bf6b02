#pragma once

#include <optional>
#include <string>
#include <vector>

#include "roopl/ast.hpp"
#include "roopl/token.hpp"

namespace roopl {

namespace detail {

struct OpInfo {
    BinOp op;
    int prec; // higher binds tighter
};

inline std::optional<OpInfo> binop_info(const Token& tok) {
    if (tok.kind != TokenKind::Operator)
        return std::nullopt;
    const std::string& s = tok.lexeme;
    if (s == "||") return OpInfo{BinOp::LogOr, 1};
    if (s == "&&") return OpInfo{BinOp::LogAnd, 2};
    if (s == "=") return OpInfo{BinOp::Eq, 3};
    if (s == "!=") return OpInfo{BinOp::Ne, 3};
    if (s == "<") return OpInfo{BinOp::Lt, 3};
    if (s == ">") return OpInfo{BinOp::Gt, 3};
    if (s == "<=") return OpInfo{BinOp::Le, 3};
    if (s == ">=") return OpInfo{BinOp::Ge, 3};
    if (s == "|") return OpInfo{BinOp::BitOr, 4};
    if (s == "^") return OpInfo{BinOp::Xor, 4};
    if (s == "&") return OpInfo{BinOp::BitAnd, 4};
    if (s == "+") return OpInfo{BinOp::Add, 5};
    if (s == "-") return OpInfo{BinOp::Sub, 5};
    if (s == "*") return OpInfo{BinOp::Mul, 6};
    if (s == "/") return OpInfo{BinOp::Div, 6};
    if (s == "%") return OpInfo{BinOp::Mod, 6};
    return std::nullopt;
}

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    Program parse_program() {
        Program prog;
        while (!at_end())
            prog.classes.push_back(parse_class());
        if (prog.classes.empty())
            fail("expected at least one class definition");
        return prog;
    }

private:
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;

    const Token& peek(std::size_t ahead = 0) const {
        std::size_t i = pos_ + ahead;
        return i < tokens_.size() ? tokens_[i] : tokens_.back();
    }
    const Token& current() const { return peek(); }
    bool at_end() const { return current().kind == TokenKind::EndOfInput; }
    Token advance() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(current().loc, msg + " (got '" +
                                            (at_end() ? "<end of input>" : current().lexeme) +
                                            "')");
    }

    Token expect_keyword(std::string_view kw) {
        if (!current().is_keyword(kw))
            fail("expected '" + std::string(kw) + "'");
        return advance();
    }
    Token expect_punct(std::string_view p) {
        if (!current().is(TokenKind::Punct, p))
            fail("expected '" + std::string(p) + "'");
        return advance();
    }
    Token expect_operator(std::string_view op) {
        if (!current().is(TokenKind::Operator, op))
            fail("expected '" + std::string(op) + "'");
        return advance();
    }
    Token expect_identifier(const char* what) {
        if (current().kind != TokenKind::Identifier)
            fail(std::string("expected ") + what);
        return advance();
    }

    Type parse_type() {
        if (current().is_keyword("int")) {
            advance();
            return Type::integer();
        }
        Token id = expect_identifier("a type name");
        return Type::cls(id.lexeme);
    }

    ClassDecl parse_class() {
        ClassDecl cls;
        cls.loc = current().loc;
        expect_keyword("class");
        cls.name = expect_identifier("a class name").lexeme;
        if (current().is_keyword("inherits")) {
            advance();
            cls.base = expect_identifier("a base class name").lexeme;
        }
        // Fields: a type followed by an identifier, until the first method.
        while (current().is_keyword("int") ||
               (current().kind == TokenKind::Identifier &&
                peek(1).kind == TokenKind::Identifier)) {
            Field f;
            f.loc = current().loc;
            f.type = parse_type();
            f.name = expect_identifier("a field name").lexeme;
            cls.fields.push_back(std::move(f));
        }
        while (current().is_keyword("method"))
            cls.methods.push_back(parse_method());
        if (cls.methods.empty())
            fail("class '" + cls.name + "' must declare at least one method");
        return cls;
    }

    MethodDecl parse_method() {
        MethodDecl m;
        m.loc = current().loc;
        expect_keyword("method");
        m.name = expect_identifier("a method name").lexeme;
        expect_punct("(");
        if (!current().is(TokenKind::Punct, ")")) {
            while (true) {
                Param p;
                p.loc = current().loc;
                p.type = parse_type();
                p.name = expect_identifier("a parameter name").lexeme;
                m.params.push_back(std::move(p));
                if (current().is(TokenKind::Punct, ","))
                    advance();
                else
                    break;
            }
        }
        expect_punct(")");
        m.body = parse_stmt_seq("method body");
        return m;
    }

    bool starts_statement() const {
        const Token& t = current();
        if (t.kind == TokenKind::Identifier)
            return true;
        return t.is_keyword("if") || t.is_keyword("from") || t.is_keyword("construct") ||
               t.is_keyword("call") || t.is_keyword("uncall") || t.is_keyword("skip") ||
               t.is_keyword("local") || t.is_keyword("reversal");
    }

    StmtSeq parse_stmt_seq(const char* what) {
        StmtSeq seq;
        while (starts_statement())
            seq.push_back(parse_statement());
        if (seq.empty())
            fail(std::string("expected a statement in ") + what);
        return seq;
    }

    Statement parse_statement() {
        SourceLoc loc = current().loc;
        const Token& t = current();
        if (t.is_keyword("skip")) {
            advance();
            return make_stmt(Statement::Skip{}, loc);
        }
        if (t.is_keyword("if"))
            return parse_if(loc);
        if (t.is_keyword("from"))
            return parse_loop(loc);
        if (t.is_keyword("construct"))
            return parse_object_block(loc);
        if (t.is_keyword("local"))
            return parse_local_block(loc);
        if (t.is_keyword("call") || t.is_keyword("uncall"))
            return parse_invocation(loc);
        if (t.is_keyword("reversal"))
            return parse_reversal(loc);
        if (t.kind == TokenKind::Identifier)
            return parse_update(loc);
        fail("expected a statement");
    }

    Statement parse_update(SourceLoc loc) {
        std::string target = advance().lexeme;
        const Token& op = current();
        if (op.is(TokenKind::Operator, "<=>")) {
            advance();
            std::string right = expect_identifier("a variable name").lexeme;
            return make_stmt(Statement::Swap{target, right}, loc);
        }
        ModOp mod;
        if (op.is(TokenKind::Operator, "+="))
            mod = ModOp::Add;
        else if (op.is(TokenKind::Operator, "-="))
            mod = ModOp::Sub;
        else if (op.is(TokenKind::Operator, "^="))
            mod = ModOp::Xor;
        else
            fail("expected '+=', '-=', '^=' or '<=>'");
        advance();
        ExprPtr e = parse_expression();
        return make_stmt(Statement::Assign{target, mod, e}, loc);
    }

    Statement parse_if(SourceLoc loc) {
        expect_keyword("if");
        Statement::If node;
        node.entry = parse_expression();
        expect_keyword("then");
        node.then_branch = parse_stmt_seq("then branch");
        if (current().is_keyword("else")) {
            advance();
            node.else_branch = parse_stmt_seq("else branch");
            node.has_else = true;
        } else {
            node.has_else = false;
        }
        expect_keyword("fi");
        node.exit = parse_expression();
        return make_stmt(std::move(node), loc);
    }

    Statement parse_loop(SourceLoc loc) {
        expect_keyword("from");
        Statement::Loop node;
        node.entry = parse_expression();
        node.has_do = current().is_keyword("do");
        if (node.has_do) {
            advance();
            node.do_body = parse_stmt_seq("do body");
        }
        node.has_loop = current().is_keyword("loop");
        if (node.has_loop) {
            advance();
            node.loop_body = parse_stmt_seq("loop body");
        }
        if (!node.has_do && !node.has_loop)
            fail("expected 'do' or 'loop'");
        expect_keyword("until");
        node.exit = parse_expression();
        return make_stmt(std::move(node), loc);
    }

    std::vector<ExprPtr> parse_args() {
        std::vector<ExprPtr> args;
        expect_punct("(");
        if (!current().is(TokenKind::Punct, ")")) {
            while (true) {
                args.push_back(parse_expression());
                if (current().is(TokenKind::Punct, ","))
                    advance();
                else
                    break;
            }
        }
        expect_punct(")");
        return args;
    }

    Statement parse_object_block(SourceLoc loc) {
        expect_keyword("construct");
        Statement::ObjectBlock node;
        node.class_name = expect_identifier("a class name").lexeme;
        node.var = expect_identifier("a variable name").lexeme;
        if (current().is(TokenKind::Punct, "(")) {
            node.has_ctor = true;
            node.ctor_args = parse_args();
        }
        node.body = parse_stmt_seq("object block");
        expect_keyword("destruct");
        Token var = expect_identifier("the object variable");
        if (var.lexeme != node.var)
            throw ParseError(var.loc, "destruct of '" + var.lexeme + "' does not match construct of '" +
                                          node.var + "'");
        if (node.has_ctor)
            node.dtor_args = parse_args();
        else if (current().is(TokenKind::Punct, "("))
            throw ParseError(current().loc,
                             "destruct has arguments but construct of '" + node.var + "' has none");
        return make_stmt(std::move(node), loc);
    }

    Statement parse_local_block(SourceLoc loc) {
        expect_keyword("local");
        expect_keyword("int"); // only integers can be allocated locally
        Statement::LocalBlock node;
        while (true) {
            LocalDecl d;
            d.name = expect_identifier("a variable name").lexeme;
            expect_operator("=");
            d.expr = parse_expression();
            node.decls.push_back(std::move(d));
            if (current().is(TokenKind::Punct, ","))
                advance();
            else
                break;
        }
        node.body = parse_stmt_seq("local block");
        expect_keyword("delocal");
        for (std::size_t i = 0; i < node.decls.size(); ++i) {
            Token name = expect_identifier("a variable name");
            if (name.lexeme != node.decls[i].name)
                throw ParseError(name.loc, "delocal of '" + name.lexeme +
                                               "' does not match local declaration of '" +
                                               node.decls[i].name + "'");
            LocalDecl d;
            d.name = name.lexeme;
            expect_operator("=");
            d.expr = parse_expression();
            node.exits.push_back(std::move(d));
            if (i + 1 < node.decls.size())
                expect_punct(",");
        }
        return make_stmt(std::move(node), loc);
    }

    Statement parse_invocation(SourceLoc loc) {
        Statement::Invocation node;
        node.is_uncall = current().is_keyword("uncall");
        advance();
        Token first = expect_identifier("a method or object name");
        if (current().is(TokenKind::Punct, "::")) {
            advance();
            node.callee = first.lexeme;
            node.method = expect_identifier("a method name").lexeme;
        } else {
            node.method = first.lexeme;
        }
        node.args = parse_args();
        return make_stmt(std::move(node), loc);
    }

    Statement parse_reversal(SourceLoc loc) {
        expect_keyword("reversal");
        Statement::Reversal node;
        node.method = expect_identifier("a method name").lexeme;
        node.args = parse_args();
        node.body.push_back(parse_statement());
        return make_stmt(std::move(node), loc);
    }

    ExprPtr parse_expression(int min_prec = 0) {
        ExprPtr lhs = parse_primary();
        while (true) {
            auto info = binop_info(current());
            if (!info || info->prec < min_prec)
                break;
            SourceLoc loc = current().loc;
            advance();
            ExprPtr rhs = parse_expression(info->prec + 1); // left-associative
            lhs = make_binary(info->op, std::move(lhs), std::move(rhs), loc);
        }
        return lhs;
    }

    ExprPtr parse_primary() {
        const Token& t = current();
        SourceLoc loc = t.loc;
        if (t.kind == TokenKind::IntLiteral) {
            advance();
            return make_const(static_cast<std::int32_t>(std::stoll(t.lexeme)), loc);
        }
        if (t.is_keyword("nil")) {
            advance();
            return make_nil(loc);
        }
        if (t.kind == TokenKind::Identifier) {
            advance();
            return make_var(t.lexeme, loc);
        }
        if (t.is(TokenKind::Punct, "(")) {
            advance();
            ExprPtr e = parse_expression();
            expect_punct(")");
            return e;
        }
        fail("expected an expression");
    }
};

} // namespace detail

inline Program parse_program(std::vector<Token> tokens) {
    return detail::Parser(std::move(tokens)).parse_program();
}

inline Program parse_source(std::string_view source) {
    return parse_program(tokenize(source));
}

} // namespace roopl
