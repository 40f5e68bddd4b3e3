#pragma once

#include <memory>
#include <string>
#include <vector>

#include "spinlab/ultrametric.hpp"

namespace spinlab {

/// Small arithmetic language for test functions of replica overlaps.
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' integer)?
///   primary := number | Rij | R(i,j) | x | y | z
///            | (min | max) '(' expr ',' expr ')' | abs '(' expr ')' | '(' expr ')'
///
/// Rij uses single-digit 1-based replica indices; R(i,j) allows any.
class Expression {
public:
    Expression() = default;
    static Expression parse(const std::string& text);

    struct Context {
        const UltrametricMatrix* overlaps = nullptr;
        double x = 0.0, y = 0.0, z = 0.0;
    };
    double evaluate(const Context& ctx) const;
    double operator()(double x, double y = 0.0, double z = 0.0) const { return evaluate({nullptr, x, y, z}); }

    /// Canonical fully parenthesized rendering.
    std::string to_string() const;
    const std::string& source() const { return source_; }
    /// Largest replica index referenced (0 if none).
    std::size_t max_replica() const;
    bool uses_variables() const;

    struct Node;

private:
    std::shared_ptr<const Node> root_;
    std::string source_;
};

}  // namespace spinlab
