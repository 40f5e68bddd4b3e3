#include "spinlab/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "spinlab/errors.hpp"

namespace spinlab {

struct Expression::Node {
    enum class Kind { number, entry, var, neg, add, sub, mul, div, pow, min, max, abs } kind;
    double value = 0.0;
    std::size_t i = 0, j = 0;  // entry indices (0-based) or variable index
    int exponent = 0;
    std::shared_ptr<const Node> a, b;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make(Node::Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    NodePtr parse_all() {
        auto n = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return n;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        std::ostringstream os;
        os << "expression \"" << s_ << "\": " << what << " at column " << pos_ + 1;
        throw ConfigError(os.str());
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }
    std::size_t integer() {
        skip();
        const std::size_t start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (start == pos_) fail("expected an integer");
        return std::stoul(s_.substr(start, pos_ - start));
    }

    NodePtr expr() {
        auto n = term();
        for (;;) {
            if (accept('+')) n = make(Node::Kind::add, n, term());
            else if (accept('-')) n = make(Node::Kind::sub, n, term());
            else return n;
        }
    }
    NodePtr term() {
        auto n = unary();
        for (;;) {
            if (accept('*')) n = make(Node::Kind::mul, n, unary());
            else if (accept('/')) n = make(Node::Kind::div, n, unary());
            else return n;
        }
    }
    NodePtr unary() {
        if (accept('-')) return make(Node::Kind::neg, unary());
        return power();
    }
    NodePtr power() {
        auto n = primary();
        if (accept('^')) {
            auto p = std::make_shared<Node>(*make(Node::Kind::pow, n));
            p->exponent = static_cast<int>(integer());
            return p;
        }
        return n;
    }
    NodePtr entry(std::size_t i, std::size_t j) {
        if (i == 0 || j == 0) fail("replica indices are 1-based");
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::entry;
        n->i = i - 1;
        n->j = j - 1;
        return n;
    }
    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            auto n = expr();
            expect(')');
            return n;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) fail("malformed number");
            pos_ += static_cast<std::size_t>(end - begin);
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::number;
            n->value = v;
            return n;
        }
        if (!std::isalpha(static_cast<unsigned char>(c))) fail("unexpected '" + std::string(1, c) + "'");
        const std::size_t start = pos_;
        while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        const std::string id = s_.substr(start, pos_ - start);
        if (id == "x" || id == "y" || id == "z") {
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::var;
            n->i = static_cast<std::size_t>(id[0] - 'x');
            return n;
        }
        if (id == "R") {
            expect('(');
            const std::size_t i = integer();
            expect(',');
            const std::size_t j = integer();
            expect(')');
            return entry(i, j);
        }
        if (id.size() == 3 && id[0] == 'R' && std::isdigit(static_cast<unsigned char>(id[1])) &&
            std::isdigit(static_cast<unsigned char>(id[2])))
            return entry(static_cast<std::size_t>(id[1] - '0'), static_cast<std::size_t>(id[2] - '0'));
        if (id == "min" || id == "max") {
            expect('(');
            auto a = expr();
            expect(',');
            auto b = expr();
            expect(')');
            return make(id == "min" ? Node::Kind::min : Node::Kind::max, a, b);
        }
        if (id == "abs") {
            expect('(');
            auto a = expr();
            expect(')');
            return make(Node::Kind::abs, a);
        }
        pos_ = start;
        fail("unknown identifier '" + id + "'");
    }

    const std::string& s_;
    std::size_t pos_ = 0;
};

double eval(const Node& n, const Expression::Context& ctx) {
    switch (n.kind) {
        case Node::Kind::number: return n.value;
        case Node::Kind::entry:
            if (!ctx.overlaps || n.i >= ctx.overlaps->size() || n.j >= ctx.overlaps->size())
                throw ConfigError("expression references a replica outside the overlap matrix");
            return (*ctx.overlaps)(n.i, n.j);
        case Node::Kind::var: return n.i == 0 ? ctx.x : n.i == 1 ? ctx.y : ctx.z;
        case Node::Kind::neg: return -eval(*n.a, ctx);
        case Node::Kind::add: return eval(*n.a, ctx) + eval(*n.b, ctx);
        case Node::Kind::sub: return eval(*n.a, ctx) - eval(*n.b, ctx);
        case Node::Kind::mul: return eval(*n.a, ctx) * eval(*n.b, ctx);
        case Node::Kind::div: return eval(*n.a, ctx) / eval(*n.b, ctx);
        case Node::Kind::pow: {
            const double base = eval(*n.a, ctx);
            double r = 1.0;
            for (int k = 0; k < n.exponent; ++k) r *= base;
            return r;
        }
        case Node::Kind::min: return std::min(eval(*n.a, ctx), eval(*n.b, ctx));
        case Node::Kind::max: return std::max(eval(*n.a, ctx), eval(*n.b, ctx));
        case Node::Kind::abs: return std::abs(eval(*n.a, ctx));
    }
    return 0.0;
}

void render(const Node& n, std::ostream& os) {
    auto bin = [&](const char* op) {
        os << '(';
        render(*n.a, os);
        os << ' ' << op << ' ';
        render(*n.b, os);
        os << ')';
    };
    switch (n.kind) {
        case Node::Kind::number: os << n.value; break;
        case Node::Kind::entry: os << "R(" << n.i + 1 << ',' << n.j + 1 << ')'; break;
        case Node::Kind::var: os << static_cast<char>('x' + n.i); break;
        case Node::Kind::neg: os << "(-"; render(*n.a, os); os << ')'; break;
        case Node::Kind::add: bin("+"); break;
        case Node::Kind::sub: bin("-"); break;
        case Node::Kind::mul: bin("*"); break;
        case Node::Kind::div: bin("/"); break;
        case Node::Kind::pow: os << '('; render(*n.a, os); os << '^' << n.exponent << ')'; break;
        case Node::Kind::min:
        case Node::Kind::max:
            os << (n.kind == Node::Kind::min ? "min(" : "max(");
            render(*n.a, os);
            os << ", ";
            render(*n.b, os);
            os << ')';
            break;
        case Node::Kind::abs: os << "abs("; render(*n.a, os); os << ')'; break;
    }
}

template <class F>
void visit(const Node& n, F&& f) {
    f(n);
    if (n.a) visit(*n.a, f);
    if (n.b) visit(*n.b, f);
}

}  // namespace

Expression Expression::parse(const std::string& text) {
    Expression e;
    e.source_ = text;
    e.root_ = Parser(text).parse_all();
    return e;
}

double Expression::evaluate(const Context& ctx) const {
    if (!root_) throw ConfigError("evaluating an empty expression");
    return eval(*root_, ctx);
}

std::string Expression::to_string() const {
    if (!root_) return "";
    std::ostringstream os;
    os.precision(17);
    render(*root_, os);
    return os.str();
}

std::size_t Expression::max_replica() const {
    std::size_t m = 0;
    if (root_)
        visit(*root_, [&](const Node& n) {
            if (n.kind == Node::Kind::entry) m = std::max({m, n.i + 1, n.j + 1});
        });
    return m;
}

bool Expression::uses_variables() const {
    bool any = false;
    if (root_) visit(*root_, [&](const Node& n) { any = any || n.kind == Node::Kind::var; });
    return any;
}

}  // namespace spinlab
