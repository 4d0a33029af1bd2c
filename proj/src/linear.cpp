// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/linear.hpp"

#include <string>

namespace certkit {

RelaxSpec parse_relax(std::string_view text) {
    if (text == "adaptive") return {RelaxMode::Adaptive, 0.0};
    if (text == "parallel") return {RelaxMode::Parallel, 0.0};
    if (text == "zero") return RelaxSpec::fixed(0.0);
    if (text == "one") return RelaxSpec::fixed(1.0);
    throw Error(ErrorKind::InvalidArgument, "unknown relaxation '" + std::string(text) + "'");
}

ReluRelaxation relu_relax(double l, double u, RelaxSpec relax) {
    if (l > u) {
        throw Error(ErrorKind::InvalidArgument,
                    "relu_relax: lower bound " + std::to_string(l) + " exceeds upper bound " + std::to_string(u));
    }
    if (l >= 0.0) return {1.0, 0.0, 1.0, 0.0};
    if (u <= 0.0) return {0.0, 0.0, 0.0, 0.0};

    ReluRelaxation r;
    r.upper_slope = u / (u - l);
    r.upper_intercept = -r.upper_slope * l;
    switch (relax.mode) {
    case RelaxMode::Parallel: r.lower_slope = r.upper_slope; break;
    case RelaxMode::Adaptive: r.lower_slope = u >= -l ? 1.0 : 0.0; break;
    case RelaxMode::FixedLambda:
        if (!(relax.lambda >= 0.0 && relax.lambda <= 1.0)) {
            throw Error(ErrorKind::InvalidArgument, "fixed lower slope must lie in [0,1]");
        }
        r.lower_slope = relax.lambda;
        break;
    }
    r.lower_intercept = 0.0;
    return r;
}

LinearForm backsubstitute_lower(const Network& net, std::size_t layer, const Matrix& objective,
                                const Vector& offset, const std::vector<LayerBounds>& preactivation,
                                RelaxSpec relax) {
    if (layer >= net.depth()) throw Error(ErrorKind::InvalidArgument, "layer index out of range");
    if (static_cast<std::size_t>(objective.cols()) != net.affine(layer).out_dim() ||
        offset.size() != objective.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "objective does not match the layer width");
    }
    if (preactivation.size() < layer) {
        throw Error(ErrorKind::DimensionMismatch, "missing pre-activation bounds for back-substitution");
    }

    Matrix a = objective;
    Vector a0 = offset;
    for (std::size_t i = layer + 1; i-- > 0;) {
        const AffineLayer& affine = net.affine(i);
        a0 += a * affine.bias;
        a = a * affine.weights;
        if (i == 0) break;

        // Relax the ReLU feeding affine layer i, per coefficient sign.
        const LayerBounds& bounds = preactivation[i - 1];
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            const ReluRelaxation r = relu_relax(bounds.lower[j], bounds.upper[j], relax);
            for (Eigen::Index row = 0; row < a.rows(); ++row) {
                const double coef = a(row, j);
                if (coef >= 0.0) {
                    a0[row] += coef * r.lower_intercept;
                    a(row, j) = coef * r.lower_slope;
                } else {
                    a0[row] += coef * r.upper_intercept;
                    a(row, j) = coef * r.upper_slope;
                }
            }
        }
    }
    return LinearForm{std::move(a), std::move(a0)};
}

Vector concretize_lower(const LinearForm& form, const VerificationProblem& problem) {
    if (form.coeffs.cols() != problem.x0.size()) {
        throw Error(ErrorKind::DimensionMismatch, "linear form does not match the input dimension");
    }
    Vector out(form.coeffs.rows());
    if (problem.norm == Norm::Linf) {
        const Vector lo = problem.box_lower();
        const Vector hi = problem.box_upper();
        const Vector center = (lo + hi) * 0.5;
        const Vector radius = (hi - lo) * 0.5;
        for (Eigen::Index r = 0; r < out.size(); ++r) {
            const auto row = form.coeffs.row(r);
            out[r] = row.dot(center) - row.cwiseAbs().dot(radius) + form.offset[r];
        }
        return out;
    }
    for (Eigen::Index r = 0; r < out.size(); ++r) {
        const Vector row = form.coeffs.row(r).transpose();
        out[r] = row.dot(problem.x0) + form.offset[r] - problem.eps * dual_norm(row, problem.norm);
    }
    return out;
}

LinearFunctionBounds linear_function_bounds(const Network& net, std::size_t layer,
                                            const std::vector<LayerBounds>& preactivation, RelaxSpec relax) {
    const auto width = static_cast<Eigen::Index>(net.affine(layer).out_dim());
    const Matrix identity = Matrix::Identity(width, width);
    const Vector zero = Vector::Zero(width);
    LinearForm lower = backsubstitute_lower(net, layer, identity, zero, preactivation, relax);
    LinearForm negated_upper = backsubstitute_lower(net, layer, -identity, zero, preactivation, relax);
    return LinearFunctionBounds{std::move(lower.coeffs), std::move(lower.offset), -negated_upper.coeffs,
                                -negated_upper.offset};
}

std::optional<std::vector<LayerBounds>> preactivation_bounds(const VerificationProblem& problem,
                                                             const Network& net, BoundSource source,
                                                             RelaxSpec relax, const PhaseAssignment& splits) {
    problem.validate(net.input_dim(), net.num_classes());
    if (source == BoundSource::Interval) {
        auto ibp = ibp_propagate(net, problem.box_lower(), problem.box_upper(), splits);
        if (!ibp) return std::nullopt;
        return std::move(ibp->preactivation);
    }

    std::vector<LayerBounds> bounds;
    LayerBounds previous_activation{problem.box_lower(), problem.box_upper()};
    for (std::size_t k = 0; k < net.num_hidden_layers(); ++k) {
        const auto width = static_cast<Eigen::Index>(net.hidden_width(k));
        const Matrix identity = Matrix::Identity(width, width);
        const Vector zero = Vector::Zero(width);
        const Vector lower =
            concretize_lower(backsubstitute_lower(net, k, identity, zero, bounds, relax), problem);
        const Vector upper =
            -concretize_lower(backsubstitute_lower(net, k, -identity, zero, bounds, relax), problem);

        LayerBounds layer = affine_interval(net.affine(k), previous_activation);
        layer.lower = layer.lower.cwiseMax(lower);
        layer.upper = layer.upper.cwiseMin(upper);
        if (!apply_splits(layer, splits, k)) return std::nullopt;
        previous_activation = relu_interval(layer);
        bounds.push_back(std::move(layer));
    }
    return bounds;
}

std::vector<LayerBounds> preactivation_bounds(const VerificationProblem& problem, const Network& net,
                                              BoundSource source, RelaxSpec relax) {
    return *preactivation_bounds(problem, net, source, relax, PhaseAssignment{});
}

double backward_lower_bound(const Network& net, const VerificationProblem& problem, const Vector& c, double c0,
                            RelaxSpec relax, const std::vector<LayerBounds>& preactivation) {
    if (static_cast<std::size_t>(c.size()) != net.num_classes()) {
        throw Error(ErrorKind::DimensionMismatch, "objective length must equal the number of classes");
    }
    const Matrix objective = c.transpose();
    const Vector offset = Vector::Constant(1, c0);
    const LinearForm form = backsubstitute_lower(net, net.depth() - 1, objective, offset, preactivation, relax);
    return concretize_lower(form, problem)[0];
}

Vector crown_margins(const Network& net, const VerificationProblem& problem, RelaxSpec relax,
                     const std::vector<LayerBounds>& preactivation) {
    const auto classes = static_cast<Eigen::Index>(net.num_classes());
    Matrix objective = Matrix::Zero(classes, classes);
    for (Eigen::Index y = 0; y < classes; ++y) {
        if (y == problem.y0) continue;
        objective(y, problem.y0) = 1.0;
        objective(y, y) = -1.0;
    }
    const LinearForm form =
        backsubstitute_lower(net, net.depth() - 1, objective, Vector::Zero(classes), preactivation, relax);
    // Concretizing at the last hidden layer's box is also implied by the
    // same bounds; keep whichever is tighter per class.
    Vector margins = concretize_lower(form, problem).cwiseMax(ibp_margins(net, problem, preactivation));
    margins[problem.y0] = kInfinity;
    return margins;
}

VerificationResult crown_verify(const VerificationProblem& problem, const Network& net, RelaxSpec relax,
                                BoundSource source) {
    const auto preactivation = preactivation_bounds(problem, net, source, relax);
    VerificationResult result;
    result.margins = crown_margins(net, problem, relax, preactivation);
    result.verdict = verdict_from_margins(result.margins, problem.y0);
    return result;
}

} // namespace certkit
