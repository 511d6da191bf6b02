#include <catch2/catch_amalgamated.hpp>

#include <functional>

#include "roopl/desugar.hpp"
#include "roopl/parser.hpp"
#include "roopl/type_check.hpp"

using namespace roopl;

namespace {

struct Checked {
    Program prog;
    ClassModel model;
    std::vector<Diagnostic> diags;
};

// Program must stay alive while the model is used; keep both together.
std::shared_ptr<Checked> check_source(const std::string& source) {
    auto out = std::make_shared<Checked>();
    out->prog = desugar(parse_source(source));
    std::vector<Diagnostic> class_diags;
    auto model = build_class_model(out->prog, class_diags);
    REQUIRE(model.has_value());
    out->model = std::move(*model);
    out->diags = check_program(out->model, out->prog);
    return out;
}

bool has_rule(const std::vector<Diagnostic>& diags, const std::string& rule) {
    for (const auto& d : diags)
        if (d.rule == rule)
            return true;
    return false;
}

const char* kObjectDemo = R"(
class Object
    int data

    method add5()
        data += 5

    method get(int out)
        out ^= data

class Program
    int result

    method main()
        construct Object obj
            call obj::add5()
            call obj::get(result)
            uncall obj::add5()
        destruct obj
)";

const char* kLinkedList = R"(
class Node
    int data
    Node next

    method constructor(int d, Node n)
        data ^= d
        next <=> n

    method add(int out)
        out += data

    method sub(int out)
        out -= data

    method xor(int out)
        out ^= data

    method swap(int out)
        out <=> data

    method swapNext(Node out)
        out <=> next

    method length(int out)
        out += 1
        if next != nil then
            call next::length(out)
        fi next != nil

class Iterator
    int result

    method run(Node head, Node next)
        skip

    method get(int out)
        out <=> result

class ListBuilder
    int n
    Iterator it
    Node empty

    method constructor(int len, Iterator i)
        n += len
        it <=> i

    method build(Node head)
        if n = 0 then
            if head != nil then
                call it::run(head, empty)
            fi head != nil
        else
            construct Node next(n, head)
                n -= 1
                call build(next)
                n += 1
            destruct next(n, head)
        fi n = 0

class Sum inherits Iterator
    int sum

    method run(Node head, Node next)
        call head::add(sum)
        call head::swapNext(next)
        if next = nil then
            result += sum
        else
            call run(next, head)
        fi next = nil
        uncall head::swapNext(next)
        uncall head::add(sum)

class Program
    int result
    Node empty

    method main()
        local int n = 5
            construct Sum it
                construct ListBuilder lb(n, it)
                    call lb::build(empty)
                destruct lb(n, it)
                call it::get(result)
            destruct it
        delocal n = 5
)";

} // namespace

TEST_CASE("vars collects identifiers from expression leaves") {
    CHECK(vars(make_const(5)).empty());
    CHECK(vars(make_nil()).empty());
    auto e = make_binary(BinOp::Add, make_var("x"),
                         make_binary(BinOp::Mul, make_var("y"), make_var("x")));
    CHECK(vars(e) == std::set<std::string>{"x", "y"});
}

TEST_CASE("expression typing follows the typing rules") {
    auto checked = check_source(kLinkedList);
    TypeEnv env;
    env.bind_in_place("x", Type::integer());
    env.bind_in_place("a", Type::cls("Node"));
    env.bind_in_place("b", Type::cls("Iterator"));

    std::vector<Diagnostic> diags;
    SECTION("integer arithmetic is int") {
        auto t = type_of_expression(checked->model, env,
                                    make_binary(BinOp::Add, make_var("x"), make_const(1)), diags);
        REQUIRE(t.has_value());
        CHECK(t->is_int());
        CHECK(diags.empty());
    }
    SECTION("reference against nil comparison is int") {
        auto t = type_of_expression(checked->model, env,
                                    make_binary(BinOp::Ne, make_var("a"), make_nil()), diags);
        REQUIRE(t.has_value());
        CHECK(t->is_int());
    }
    SECTION("comparing distinct class types is an error") {
        auto t = type_of_expression(checked->model, env,
                                    make_binary(BinOp::Eq, make_var("a"), make_var("b")), diags);
        CHECK_FALSE(t.has_value());
        CHECK(has_rule(diags, "TypeMismatch"));
    }
    SECTION("adding objects is an error") {
        auto t = type_of_expression(checked->model, env,
                                    make_binary(BinOp::Add, make_var("a"), make_var("b")), diags);
        CHECK_FALSE(t.has_value());
        CHECK(has_rule(diags, "TypeMismatch"));
    }
    SECTION("nil in arithmetic is an error") {
        auto t = type_of_expression(checked->model, env,
                                    make_binary(BinOp::Add, make_nil(), make_const(1)), diags);
        CHECK_FALSE(t.has_value());
        CHECK(has_rule(diags, "NilInArithmetic"));
    }
    SECTION("unbound variables are reported") {
        auto t = type_of_expression(checked->model, env, make_var("ghost"), diags);
        CHECK_FALSE(t.has_value());
        CHECK(has_rule(diags, "UnboundVariable"));
    }
}

TEST_CASE("self-referencing update violates T-AssVar") {
    auto checked = check_source("class P int x method main() x += x");
    CHECK(has_rule(checked->diags, "T-AssVar"));
}

TEST_CASE("duplicate call arguments are rejected") {
    auto checked = check_source(R"(
class P
    int x
    method bar(int a, int b)
        a += b
    method main()
        local int a = 0
            call bar(a, a)
        delocal a = 0
)");
    CHECK(has_rule(checked->diags, "T-Call"));
}

TEST_CASE("fields may not be arguments of local calls") {
    auto checked = check_source(R"(
class P
    int a
    method foo(int b)
        a -= b
    method main()
        call foo(a)
)");
    CHECK(has_rule(checked->diags, "T-Call"));
}

TEST_CASE("fields are allowed as arguments of object calls") {
    auto checked = check_source(kObjectDemo);
    CHECK(checked->diags.empty());
}

TEST_CASE("the callee may not also be an argument") {
    auto checked = check_source(R"(
class Q
    method poke(Q other)
        skip
class P
    int r
    method main()
        construct Q q
            call q::poke(q)
        destruct q
)");
    CHECK(has_rule(checked->diags, "T-CallO"));
}

TEST_CASE("subtype polymorphism accepts a derived argument") {
    auto checked = check_source(R"(
class Base
    method m()
        skip
class Derived inherits Base
    method m()
        skip
class User
    method use(Base b)
        skip
class P
    int r
    method main()
        construct Derived d
            construct User u
                call u::use(d)
            destruct u
        destruct d
)");
    CHECK(checked->diags.empty());
}

TEST_CASE("passing a base object where a derived is expected fails") {
    auto checked = check_source(R"(
class Base
    method m()
        skip
class Derived inherits Base
    method m()
        skip
class User
    method use(Derived d)
        skip
class P
    int r
    method main()
        construct Base b
            construct User u
                call u::use(b)
            destruct u
        destruct b
)");
    CHECK(has_rule(checked->diags, "T-CallO"));
}

TEST_CASE("swap requires identical types") {
    auto checked = check_source(R"(
class A
    method m()
        skip
class B inherits A
    method m()
        skip
class P
    int r
    method main()
        construct A a
            construct B b
                a <=> b
            destruct b
        destruct a
)");
    CHECK(has_rule(checked->diags, "T-SwpVar"));
}

TEST_CASE("uncall obeys the same conditions as call") {
    auto checked = check_source(R"(
class P
    int a
    method foo(int b)
        a -= b
    method main()
        uncall foo(a)
)");
    CHECK(has_rule(checked->diags, "T-UC"));
}

TEST_CASE("arity mismatches are reported") {
    auto checked = check_source(R"(
class P
    int x
    method q(int a)
        a += 1
    method main()
        call q()
)");
    CHECK(has_rule(checked->diags, "T-Call"));
}

TEST_CASE("guards of conditionals and loops must be int") {
    auto checked = check_source(R"(
class Q
    method m()
        skip
class P
    int x
    method main()
        construct Q q
            if q then skip fi q
        destruct q
)");
    CHECK(has_rule(checked->diags, "T-If"));
}

TEST_CASE("block variables may not appear in their own local expressions") {
    auto checked = check_source(R"(
class P
    int x
    method main()
        local int t = t + 1
            skip
        delocal t = 0
)");
    CHECK(has_rule(checked->diags, "T-LocalBlock"));
}

TEST_CASE("object block shadows outer bindings") {
    auto checked = check_source(R"(
class Q
    method m()
        skip
class P
    int x
    method main()
        construct Q x
            call x::m()
        destruct x
)");
    CHECK(checked->diags.empty());
}

TEST_CASE("the object block demo type checks cleanly") {
    auto checked = check_source(kObjectDemo);
    CHECK(checked->diags.empty());
}

TEST_CASE("the linked list program type checks cleanly") {
    auto checked = check_source(kLinkedList);
    for (const auto& d : checked->diags)
        UNSCOPED_INFO(d.render());
    CHECK(checked->diags.empty());
}

TEST_CASE("diagnostics are deterministic and location stable") {
    const char* bad = R"(
class P
    int x
    method main()
        x += x
        y += 1
        x <=> y
)";
    auto first = check_source(bad);
    auto second = check_source(bad);
    REQUIRE(first->diags.size() == second->diags.size());
    for (std::size_t i = 0; i < first->diags.size(); ++i)
        CHECK(first->diags[i] == second->diags[i]);
    CHECK(first->diags.size() >= 3);
}

TEST_CASE("variable substitution of equal type preserves acceptance") {
    auto checked = check_source("class P int x method main() skip");
    TypeEnv env;
    env.bind_in_place("p", Type::integer());
    env.bind_in_place("q", Type::integer());
    auto exprs = {
        make_binary(BinOp::Add, make_var("p"), make_const(3)),
        make_binary(BinOp::LogAnd, make_var("p"), make_var("p")),
        make_binary(BinOp::Lt, make_const(0), make_var("p")),
    };
    for (const auto& e : exprs) {
        std::vector<Diagnostic> d1, d2;
        auto t1 = type_of_expression(checked->model, env, e, d1);
        REQUIRE(t1.has_value());
        std::function<ExprPtr(const ExprPtr&)> subst = [&](const ExprPtr& ex) -> ExprPtr {
            if (auto* v = std::get_if<Expression::Variable>(&ex->node))
                return make_var(v->name == "p" ? "q" : v->name, ex->loc);
            if (auto* b = std::get_if<Expression::Binary>(&ex->node))
                return make_binary(b->op, subst(b->left), subst(b->right), ex->loc);
            return ex;
        };
        auto t2 = type_of_expression(checked->model, env, subst(e), d2);
        REQUIRE(t2.has_value());
        CHECK(*t1 == *t2);
    }
}
