#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Symbolic expressions over named real variables.
//
// The grammar is deliberately small: constants, variables, unary minus,
// + - * / ^ (right-associative), ln, exp.  Nodes are immutable and shared,
// so expressions can be passed around and differentiated freely from
// multiple threads once built.  There is no general simplifier; the
// factory functions only fold constants and apply 0/1 identities so that
// derivatives stay readable and cheap to evaluate.

namespace thermoform::expr {

enum class Kind {
    Constant,
    Variable,
    Negate,
    Add,
    Subtract,
    Multiply,
    Divide,
    Power,
    Log,   // natural logarithm
    Exp,
};

class Expression;
using ExprPtr = std::shared_ptr<const Expression>;

class Expression {
  public:
    Kind kind() const { return kind_; }

    // Constant / Variable payloads.  Calling the wrong accessor is a
    // programming error and asserts in debug builds.
    double constant_value() const;
    const std::string& variable_name() const;

    // Children: unary nodes (Negate, Log, Exp) use left(); binary nodes
    // use both.
    const ExprPtr& left() const { return left_; }
    const ExprPtr& right() const { return right_; }

    // Factories.  These fold constant subtrees when the fold is exact and
    // well defined (e.g. ln of a negative constant is left unfolded so the
    // error surfaces at evaluation), and apply the identities
    // x+0, x-0, x*1, x*0, x/1, 0/x, x^0, x^1, -(-x), -(c).
    static ExprPtr constant(double value);
    static ExprPtr variable(std::string name);
    static ExprPtr negate(ExprPtr a);
    static ExprPtr add(ExprPtr a, ExprPtr b);
    static ExprPtr subtract(ExprPtr a, ExprPtr b);
    static ExprPtr multiply(ExprPtr a, ExprPtr b);
    static ExprPtr divide(ExprPtr a, ExprPtr b);
    static ExprPtr power(ExprPtr base, ExprPtr exponent);
    static ExprPtr log(ExprPtr a);
    static ExprPtr exp(ExprPtr a);

  private:
    Expression(Kind kind, double value, std::string name, ExprPtr left, ExprPtr right)
        : kind_(kind), value_(value), name_(std::move(name)),
          left_(std::move(left)), right_(std::move(right)) {}

    Kind kind_;
    double value_ = 0.0;
    std::string name_;
    ExprPtr left_;
    ExprPtr right_;
};

// Parse failure.  offset is the byte position in the source string where
// the parser gave up; expected lists the token classes that would have
// been accepted there.
class SyntaxError : public std::runtime_error {
  public:
    SyntaxError(std::string message, std::size_t offset, std::vector<std::string> expected);
    std::size_t offset() const { return offset_; }
    const std::vector<std::string>& expected() const { return expected_; }

  private:
    std::size_t offset_;
    std::vector<std::string> expected_;
};

// Evaluation failure: unbound variable, or a domain error (log of a
// non-positive value, division by zero, fractional power of a negative
// base, non-finite intermediate).
class EvalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Variable bindings for evaluation.  Linear scan over a small vector;
// thermodynamic models have a handful of coordinates, so this beats a map
// in the quadrature inner loops.  set() overwrites in place, which lets
// hot loops reuse one binding without reallocating.
class Binding {
  public:
    Binding() = default;
    Binding(std::initializer_list<std::pair<std::string, double>> init);

    void set(std::string_view name, double value);
    const double* find(std::string_view name) const;
    std::size_t size() const { return entries_.size(); }

  private:
    std::vector<std::pair<std::string, double>> entries_;
};

ExprPtr parse(std::string_view source);

double evaluate(const Expression& e, const Binding& binding);
inline double evaluate(const ExprPtr& e, const Binding& binding) { return evaluate(*e, binding); }

// Exact symbolic derivative; the result is simplified only by the factory
// identities above.
ExprPtr differentiate(const ExprPtr& e, std::string_view var);

// Replace every occurrence of a variable by an expression.  Rebuilding
// through the factories re-applies the light simplifications.
ExprPtr substitute(const ExprPtr& e, std::string_view var, const ExprPtr& replacement);

// Render with minimal parentheses.  Constants print with 17 significant
// digits, so parse(to_string(e)) reproduces e exactly (structural
// round-trip, not just numerical agreement).
std::string to_string(const Expression& e);
inline std::string to_string(const ExprPtr& e) { return to_string(*e); }

bool structurally_equal(const Expression& a, const Expression& b);
inline bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
    return structurally_equal(*a, *b);
}

// Sorted, deduplicated variable names appearing in e.
std::vector<std::string> free_variables(const Expression& e);
inline std::vector<std::string> free_variables(const ExprPtr& e) { return free_variables(*e); }

}  // namespace thermoform::expr
