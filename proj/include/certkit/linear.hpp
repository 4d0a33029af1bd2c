// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "certkit/interval.hpp"

#include <optional>
#include <vector>

namespace certkit {

/// Lower-slope heuristic for unstable ReLUs.
enum class RelaxMode {
    Parallel,    // lambda = u / (u - l), parallel to the upper line
    Adaptive,    // lambda = 1 if u >= -l else 0
    FixedLambda, // lambda given explicitly
};

struct RelaxSpec {
    RelaxMode mode = RelaxMode::Adaptive;
    double lambda = 0.0;

    static RelaxSpec fixed(double lambda) { return {RelaxMode::FixedLambda, lambda}; }
};

RelaxSpec parse_relax(std::string_view text);

/// lower_slope * z + lower_intercept <= relu(z) <= upper_slope * z + upper_intercept on [l, u].
struct ReluRelaxation {
    double lower_slope = 0.0;
    double lower_intercept = 0.0;
    double upper_slope = 0.0;
    double upper_intercept = 0.0;
};

ReluRelaxation relu_relax(double l, double u, RelaxSpec relax = {});

/// Rows of an affine function of the input: coeffs * x + offset.
struct LinearForm {
    Matrix coeffs;
    Vector offset;
};

/// L x + b_L <= z(x) <= U x + b_U for every x in the region the bounds were
/// computed for.
struct LinearFunctionBounds {
    Matrix lower_coeffs;
    Vector lower_offset;
    Matrix upper_coeffs;
    Vector upper_offset;
};

/// Back-substitutes the objective rows `objective * zhat_layer + offset`
/// (zhat_layer = output of affine layer `layer`) to the input, relaxing every
/// ReLU on the way. Each row of the result lower-bounds the corresponding
/// objective row wherever the pre-activation bounds hold.
LinearForm backsubstitute_lower(const Network& net, std::size_t layer, const Matrix& objective,
                                const Vector& offset, const std::vector<LayerBounds>& preactivation,
                                RelaxSpec relax);

/// Minimum of each row of `form` over the perturbation region (Hölder bound
/// a.x0 + a0 - eps*|a|_dual; exact box minimum for Linf).
Vector concretize_lower(const LinearForm& form, const VerificationProblem& problem);

/// Linear bounds of the output of affine layer `layer` in terms of the input.
LinearFunctionBounds linear_function_bounds(const Network& net, std::size_t layer,
                                            const std::vector<LayerBounds>& preactivation, RelaxSpec relax);

enum class BoundSource { Interval, Polyhedra };

/// Pre-activation bounds of every hidden layer. Polyhedra bounds are built
/// layer by layer from back-substitution and intersected with the interval
/// image of the previous layer, so they never exceed the Interval bounds.
std::vector<LayerBounds> preactivation_bounds(const VerificationProblem& problem, const Network& net,
                                              BoundSource source, RelaxSpec relax = {});

/// Same, on the sub-region selected by `splits`. nullopt if that region is
/// provably empty.
std::optional<std::vector<LayerBounds>> preactivation_bounds(const VerificationProblem& problem,
                                                             const Network& net, BoundSource source,
                                                             RelaxSpec relax, const PhaseAssignment& splits);

/// Lower bound of min over the region of c . f(x) + c0.
double backward_lower_bound(const Network& net, const VerificationProblem& problem, const Vector& c,
                            double c0, RelaxSpec relax, const std::vector<LayerBounds>& preactivation);

/// Certified lower bounds of f_{y0} - f_y for every y (y0 entry +inf): the
/// back-substitution bound, or the interval bound on the same pre-activation
/// bounds where that is tighter.
Vector crown_margins(const Network& net, const VerificationProblem& problem, RelaxSpec relax,
                     const std::vector<LayerBounds>& preactivation);

VerificationResult crown_verify(const VerificationProblem& problem, const Network& net, RelaxSpec relax = {},
                                BoundSource source = BoundSource::Polyhedra);

} // namespace certkit
