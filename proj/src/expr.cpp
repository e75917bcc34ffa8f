#include "thermoform/expr.hpp"

#include <cassert>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

namespace thermoform::expr {

namespace {

std::shared_ptr<const Expression> wrap(Expression* raw) {
    return std::shared_ptr<const Expression>(raw);
}

bool is_constant(const ExprPtr& e, double v) {
    return e->kind() == Kind::Constant && e->constant_value() == v;
}

// Exponents are treated as integers only when exactly representable;
// beyond 2^53 the parity of the exponent is not recoverable.
bool is_integral(double v) {
    return std::nearbyint(v) == v && std::fabs(v) <= 9.007199254740992e15;
}

}  // namespace

double Expression::constant_value() const {
    assert(kind_ == Kind::Constant);
    return value_;
}

const std::string& Expression::variable_name() const {
    assert(kind_ == Kind::Variable);
    return name_;
}

ExprPtr Expression::constant(double value) {
    assert(std::isfinite(value));
    return wrap(new Expression(Kind::Constant, value, {}, nullptr, nullptr));
}

ExprPtr Expression::variable(std::string name) {
    assert(!name.empty());
    return wrap(new Expression(Kind::Variable, 0.0, std::move(name), nullptr, nullptr));
}

namespace {

// Folds a freshly built node whose children are all constants, when the
// operation is defined and finite there.  Nodes like ln(-1) stay unfolded
// so the domain error surfaces at evaluation time, not at build time.
ExprPtr fold_or(ExprPtr node) {
    for (const ExprPtr* child : {&node->left(), &node->right()}) {
        if (*child && (*child)->kind() != Kind::Constant) return node;
    }
    try {
        double v = evaluate(*node, Binding{});
        if (std::isfinite(v)) return Expression::constant(v);
    } catch (const EvalError&) {
    }
    return node;
}

}  // namespace

ExprPtr Expression::negate(ExprPtr a) {
    if (a->kind() == Kind::Constant) return constant(-a->constant_value());
    if (a->kind() == Kind::Negate) return a->left();
    return wrap(new Expression(Kind::Negate, 0.0, {}, std::move(a), nullptr));
}

ExprPtr Expression::add(ExprPtr a, ExprPtr b) {
    if (is_constant(a, 0.0)) return b;
    if (is_constant(b, 0.0)) return a;
    return fold_or(wrap(new Expression(Kind::Add, 0.0, {}, std::move(a), std::move(b))));
}

ExprPtr Expression::subtract(ExprPtr a, ExprPtr b) {
    if (is_constant(b, 0.0)) return a;
    if (is_constant(a, 0.0)) return negate(std::move(b));
    return fold_or(wrap(new Expression(Kind::Subtract, 0.0, {}, std::move(a), std::move(b))));
}

ExprPtr Expression::multiply(ExprPtr a, ExprPtr b) {
    if (is_constant(a, 0.0) || is_constant(b, 0.0)) return constant(0.0);
    if (is_constant(a, 1.0)) return b;
    if (is_constant(b, 1.0)) return a;
    return fold_or(wrap(new Expression(Kind::Multiply, 0.0, {}, std::move(a), std::move(b))));
}

ExprPtr Expression::divide(ExprPtr a, ExprPtr b) {
    if (is_constant(b, 1.0)) return a;
    if (is_constant(a, 0.0)) return constant(0.0);
    return fold_or(wrap(new Expression(Kind::Divide, 0.0, {}, std::move(a), std::move(b))));
}

ExprPtr Expression::power(ExprPtr base, ExprPtr exponent) {
    if (is_constant(exponent, 1.0)) return base;
    if (is_constant(exponent, 0.0)) return constant(1.0);
    return fold_or(wrap(new Expression(Kind::Power, 0.0, {}, std::move(base), std::move(exponent))));
}

ExprPtr Expression::log(ExprPtr a) {
    return fold_or(wrap(new Expression(Kind::Log, 0.0, {}, std::move(a), nullptr)));
}

ExprPtr Expression::exp(ExprPtr a) {
    return fold_or(wrap(new Expression(Kind::Exp, 0.0, {}, std::move(a), nullptr)));
}

// ---------------------------------------------------------------------------
// Bindings

Binding::Binding(std::initializer_list<std::pair<std::string, double>> init) {
    for (const auto& [name, value] : init) set(name, value);
}

void Binding::set(std::string_view name, double value) {
    for (auto& [n, v] : entries_) {
        if (n == name) {
            v = value;
            return;
        }
    }
    entries_.emplace_back(std::string(name), value);
}

const double* Binding::find(std::string_view name) const {
    for (const auto& [n, v] : entries_) {
        if (n == name) return &v;
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

[[noreturn]] void domain_error(const std::string& what) {
    throw EvalError("domain error: " + what);
}

double eval_rec(const Expression& e, const Binding& binding) {
    switch (e.kind()) {
        case Kind::Constant:
            return e.constant_value();
        case Kind::Variable: {
            const double* v = binding.find(e.variable_name());
            if (!v) throw EvalError("unbound variable '" + e.variable_name() + "'");
            return *v;
        }
        default:
            break;
    }

    double a = eval_rec(*e.left(), binding);
    double b = e.right() ? eval_rec(*e.right(), binding) : 0.0;
    double r = 0.0;
    switch (e.kind()) {
        case Kind::Negate:
            return -a;  // cannot overflow
        case Kind::Add:
            r = a + b;
            break;
        case Kind::Subtract:
            r = a - b;
            break;
        case Kind::Multiply:
            r = a * b;
            break;
        case Kind::Divide:
            if (b == 0.0) domain_error("division by zero");
            r = a / b;
            break;
        case Kind::Power:
            if (a < 0.0 && !is_integral(b))
                domain_error("non-integer power " + std::to_string(b) + " of negative base");
            if (a == 0.0 && b < 0.0) domain_error("negative power of zero");
            r = std::pow(a, b);
            break;
        case Kind::Log:
            if (a <= 0.0) domain_error("ln of non-positive argument " + std::to_string(a));
            r = std::log(a);
            break;
        case Kind::Exp:
            r = std::exp(a);
            break;
        case Kind::Constant:
        case Kind::Variable:
            break;  // handled above
    }
    if (!std::isfinite(r)) domain_error("non-finite result");
    return r;
}

}  // namespace

double evaluate(const Expression& e, const Binding& binding) {
    return eval_rec(e, binding);
}

// ---------------------------------------------------------------------------
// Differentiation

ExprPtr differentiate(const ExprPtr& e, std::string_view var) {
    using E = Expression;
    switch (e->kind()) {
        case Kind::Constant:
            return E::constant(0.0);
        case Kind::Variable:
            return E::constant(e->variable_name() == var ? 1.0 : 0.0);
        case Kind::Negate:
            return E::negate(differentiate(e->left(), var));
        case Kind::Add:
            return E::add(differentiate(e->left(), var), differentiate(e->right(), var));
        case Kind::Subtract:
            return E::subtract(differentiate(e->left(), var), differentiate(e->right(), var));
        case Kind::Multiply:
            return E::add(E::multiply(differentiate(e->left(), var), e->right()),
                          E::multiply(e->left(), differentiate(e->right(), var)));
        case Kind::Divide:
            return E::divide(
                E::subtract(E::multiply(differentiate(e->left(), var), e->right()),
                            E::multiply(e->left(), differentiate(e->right(), var))),
                E::power(e->right(), E::constant(2.0)));
        case Kind::Power: {
            const ExprPtr& u = e->left();
            const ExprPtr& v = e->right();
            if (v->kind() == Kind::Constant) {
                double c = v->constant_value();
                return E::multiply(
                    E::multiply(E::constant(c), E::power(u, E::constant(c - 1.0))),
                    differentiate(u, var));
            }
            // u^v * (v' ln u + v u'/u), the general case
            return E::multiply(
                E::power(u, v),
                E::add(E::multiply(differentiate(v, var), E::log(u)),
                       E::divide(E::multiply(v, differentiate(u, var)), u)));
        }
        case Kind::Log:
            return E::divide(differentiate(e->left(), var), e->left());
        case Kind::Exp:
            return E::multiply(E::exp(e->left()), differentiate(e->left(), var));
    }
    return nullptr;  // unreachable
}

ExprPtr substitute(const ExprPtr& e, std::string_view var, const ExprPtr& replacement) {
    using E = Expression;
    switch (e->kind()) {
        case Kind::Constant:
            return e;
        case Kind::Variable:
            return e->variable_name() == var ? replacement : e;
        case Kind::Negate:
            return E::negate(substitute(e->left(), var, replacement));
        case Kind::Add:
            return E::add(substitute(e->left(), var, replacement),
                          substitute(e->right(), var, replacement));
        case Kind::Subtract:
            return E::subtract(substitute(e->left(), var, replacement),
                               substitute(e->right(), var, replacement));
        case Kind::Multiply:
            return E::multiply(substitute(e->left(), var, replacement),
                               substitute(e->right(), var, replacement));
        case Kind::Divide:
            return E::divide(substitute(e->left(), var, replacement),
                             substitute(e->right(), var, replacement));
        case Kind::Power:
            return E::power(substitute(e->left(), var, replacement),
                            substitute(e->right(), var, replacement));
        case Kind::Log:
            return E::log(substitute(e->left(), var, replacement));
        case Kind::Exp:
            return E::exp(substitute(e->left(), var, replacement));
    }
    return nullptr;  // unreachable
}

// ---------------------------------------------------------------------------
// Printing

namespace {

// Operator strength as seen by the parser.  A negative constant prints
// with a leading '-', so in context it behaves like a Negate node.
int strength(const Expression& e) {
    switch (e.kind()) {
        case Kind::Add:
        case Kind::Subtract:
            return 1;
        case Kind::Multiply:
        case Kind::Divide:
            return 2;
        case Kind::Negate:
            return 3;
        case Kind::Constant:
            return e.constant_value() < 0.0 ? 3 : 5;
        case Kind::Power:
            return 4;
        case Kind::Variable:
        case Kind::Log:
        case Kind::Exp:
            return 5;
    }
    return 5;
}

bool prints_negative(const Expression& e) {
    return e.kind() == Kind::Negate ||
           (e.kind() == Kind::Constant && e.constant_value() < 0.0);
}

void print_rec(const Expression& e, std::string& out);

void print_child(const Expression& child, bool parens, std::string& out) {
    if (parens) out += '(';
    print_rec(child, out);
    if (parens) out += ')';
}

void print_binary(const Expression& e, const char* op, std::string& out) {
    int prec = strength(e);
    bool right_assoc = e.kind() == Kind::Power;
    bool lp = strength(*e.left()) < prec || (right_assoc && strength(*e.left()) == prec);
    bool rp = right_assoc ? strength(*e.right()) < prec : strength(*e.right()) <= prec;
    // "a - -b" parses fine but reads badly; prefer "a - (-b)"
    if (!right_assoc && prints_negative(*e.right())) rp = true;
    print_child(*e.left(), lp, out);
    out += op;
    print_child(*e.right(), rp, out);
}

void print_rec(const Expression& e, std::string& out) {
    switch (e.kind()) {
        case Kind::Constant: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", e.constant_value());
            out += buf;
            return;
        }
        case Kind::Variable:
            out += e.variable_name();
            return;
        case Kind::Negate:
            out += '-';
            print_child(*e.left(), strength(*e.left()) <= 3, out);
            return;
        case Kind::Add:
            print_binary(e, " + ", out);
            return;
        case Kind::Subtract:
            print_binary(e, " - ", out);
            return;
        case Kind::Multiply:
            print_binary(e, " * ", out);
            return;
        case Kind::Divide:
            print_binary(e, " / ", out);
            return;
        case Kind::Power:
            print_binary(e, "^", out);
            return;
        case Kind::Log:
            out += "ln(";
            print_rec(*e.left(), out);
            out += ')';
            return;
        case Kind::Exp:
            out += "exp(";
            print_rec(*e.left(), out);
            out += ')';
            return;
    }
}

}  // namespace

std::string to_string(const Expression& e) {
    std::string out;
    print_rec(e, out);
    return out;
}

bool structurally_equal(const Expression& a, const Expression& b) {
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
        case Kind::Constant:
            return a.constant_value() == b.constant_value();
        case Kind::Variable:
            return a.variable_name() == b.variable_name();
        default:
            break;
    }
    if (static_cast<bool>(a.right()) != static_cast<bool>(b.right())) return false;
    if (!structurally_equal(*a.left(), *b.left())) return false;
    return !a.right() || structurally_equal(*a.right(), *b.right());
}

namespace {

void collect_vars(const Expression& e, std::set<std::string>& out) {
    if (e.kind() == Kind::Variable) {
        out.insert(e.variable_name());
        return;
    }
    if (e.left()) collect_vars(*e.left(), out);
    if (e.right()) collect_vars(*e.right(), out);
}

}  // namespace

std::vector<std::string> free_variables(const Expression& e) {
    std::set<std::string> vars;
    collect_vars(e, vars);
    return {vars.begin(), vars.end()};
}

// ---------------------------------------------------------------------------
// Parsing

SyntaxError::SyntaxError(std::string message, std::size_t offset,
                         std::vector<std::string> expected)
    : std::runtime_error(std::move(message)), offset_(offset), expected_(std::move(expected)) {}

namespace {

struct Token {
    enum Type { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End, Bad };
    Type type;
    std::size_t offset;
    std::string_view text;
    double value = 0.0;
};

const char* describe(const Token& t) {
    switch (t.type) {
        case Token::Number: return "number";
        case Token::Ident: return "identifier";
        case Token::Plus: return "'+'";
        case Token::Minus: return "'-'";
        case Token::Star: return "'*'";
        case Token::Slash: return "'/'";
        case Token::Caret: return "'^'";
        case Token::LParen: return "'('";
        case Token::RParen: return "')'";
        case Token::End: return "end of input";
        case Token::Bad: return "character";
    }
    return "token";
}

std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < src.size() &&
             std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            double value = 0.0;
            auto [ptr, ec] =
                std::from_chars(src.data() + i, src.data() + src.size(), value);
            std::size_t len = static_cast<std::size_t>(ptr - (src.data() + i));
            if (ec != std::errc{} || len == 0) {
                out.push_back({Token::Bad, i, src.substr(i, 1)});
                ++i;
                continue;
            }
            out.push_back({Token::Number, i, src.substr(i, len), value});
            i += len;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i + 1;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) ||
                                      src[j] == '_'))
                ++j;
            out.push_back({Token::Ident, i, src.substr(i, j - i)});
            i = j;
            continue;
        }
        Token::Type type = Token::Bad;
        switch (c) {
            case '+': type = Token::Plus; break;
            case '-': type = Token::Minus; break;
            case '*': type = Token::Star; break;
            case '/': type = Token::Slash; break;
            case '^': type = Token::Caret; break;
            case '(': type = Token::LParen; break;
            case ')': type = Token::RParen; break;
            default: break;
        }
        out.push_back({type, i, src.substr(i, 1)});
        ++i;
    }
    out.push_back({Token::End, src.size(), {}});
    return out;
}

class Parser {
  public:
    explicit Parser(std::string_view src) : tokens_(tokenize(src)) {}

    ExprPtr run() {
        ExprPtr e = parse_expression();
        if (cur().type != Token::End)
            fail({"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"});
        return e;
    }

  private:
    const Token& cur() const { return tokens_[pos_]; }
    void advance() { ++pos_; }

    [[noreturn]] void fail(std::vector<std::string> expected) const {
        const Token& t = cur();
        std::string msg = "syntax error at offset " + std::to_string(t.offset) +
                          ": unexpected " + describe(t);
        if (t.type != Token::End) msg += " '" + std::string(t.text) + "'";
        msg += "; expected ";
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (i) msg += (i + 1 == expected.size()) ? " or " : ", ";
            msg += expected[i];
        }
        throw SyntaxError(std::move(msg), t.offset, std::move(expected));
    }

    ExprPtr parse_expression() {
        ExprPtr e = parse_term();
        while (cur().type == Token::Plus || cur().type == Token::Minus) {
            bool plus = cur().type == Token::Plus;
            advance();
            ExprPtr rhs = parse_term();
            e = plus ? Expression::add(e, rhs) : Expression::subtract(e, rhs);
        }
        return e;
    }

    ExprPtr parse_term() {
        ExprPtr e = parse_unary();
        while (cur().type == Token::Star || cur().type == Token::Slash) {
            bool star = cur().type == Token::Star;
            advance();
            ExprPtr rhs = parse_unary();
            e = star ? Expression::multiply(e, rhs) : Expression::divide(e, rhs);
        }
        return e;
    }

    ExprPtr parse_unary() {
        if (cur().type == Token::Minus) {
            advance();
            return Expression::negate(parse_unary());
        }
        return parse_power();
    }

    ExprPtr parse_power() {
        ExprPtr base = parse_primary();
        if (cur().type == Token::Caret) {
            advance();
            // right-associative; the exponent may carry its own unary minus
            return Expression::power(base, parse_unary());
        }
        return base;
    }

    ExprPtr parse_primary() {
        const Token& t = cur();
        switch (t.type) {
            case Token::Number:
                advance();
                return Expression::constant(t.value);
            case Token::Ident: {
                std::string name(t.text);
                advance();
                if (cur().type != Token::LParen) return Expression::variable(std::move(name));
                if (name != "ln" && name != "exp") {
                    throw SyntaxError("unknown function '" + name + "' at offset " +
                                          std::to_string(t.offset),
                                      t.offset, {"ln", "exp"});
                }
                advance();
                ExprPtr arg = parse_expression();
                expect_rparen();
                return name == "ln" ? Expression::log(arg) : Expression::exp(arg);
            }
            case Token::LParen: {
                advance();
                ExprPtr e = parse_expression();
                expect_rparen();
                return e;
            }
            default:
                fail({"number", "identifier", "'('", "'-'"});
        }
    }

    void expect_rparen() {
        if (cur().type != Token::RParen)
            fail({"')'", "'+'", "'-'", "'*'", "'/'", "'^'"});
        advance();
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace

ExprPtr parse(std::string_view source) {
    return Parser(source).run();
}

}  // namespace thermoform::expr
