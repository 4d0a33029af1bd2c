// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/interval.hpp"

namespace certkit {

bool LayerBounds::contains(const Vector& v, double tol) const {
    if (v.size() != lower.size()) return false;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] < lower[i] - tol || v[i] > upper[i] + tol) return false;
    }
    return true;
}

LayerBounds affine_interval(const AffineLayer& layer, const LayerBounds& in) {
    if (static_cast<std::size_t>(in.lower.size()) != layer.in_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "interval has dimension " + std::to_string(in.lower.size()) +
                                                      ", layer expects " + std::to_string(layer.in_dim()));
    }
    // Center/radius form of W+ l + W- u + b; a zero-width box reproduces the
    // forward pass bit for bit.
    const Vector center = (in.lower + in.upper) * 0.5;
    const Vector radius = (in.upper - in.lower) * 0.5;
    const Vector mid = layer.weights * center + layer.bias;
    const Vector spread = layer.weights.cwiseAbs() * radius;
    return LayerBounds{mid - spread, mid + spread};
}

LayerBounds relu_interval(const LayerBounds& pre) {
    return LayerBounds{pre.lower.cwiseMax(0.0), pre.upper.cwiseMax(0.0)};
}

bool apply_splits(LayerBounds& bounds, const PhaseAssignment& splits, std::size_t layer) {
    if (layer < splits.size()) {
        const auto& phases = splits[layer];
        for (std::size_t j = 0; j < phases.size(); ++j) {
            const auto i = static_cast<Eigen::Index>(j);
            if (phases[j] == Phase::Active) {
                bounds.lower[i] = std::max(bounds.lower[i], 0.0);
            } else if (phases[j] == Phase::Inactive) {
                bounds.upper[i] = std::min(bounds.upper[i], 0.0);
            }
        }
    }
    for (Eigen::Index i = 0; i < bounds.lower.size(); ++i) {
        if (bounds.lower[i] > bounds.upper[i]) return false;
    }
    return true;
}

namespace {

void check_box(const Network& net, const Vector& lo, const Vector& hi) {
    if (static_cast<std::size_t>(lo.size()) != net.input_dim() ||
        static_cast<std::size_t>(hi.size()) != net.input_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "input box does not match the network input dimension");
    }
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        if (lo[i] > hi[i]) throw Error(ErrorKind::InvalidArgument, "input box has lower > upper");
    }
}

} // namespace

std::optional<IntervalBounds> ibp_propagate(const Network& net, const Vector& input_lower,
                                            const Vector& input_upper, const PhaseAssignment& splits) {
    check_box(net, input_lower, input_upper);
    IntervalBounds out;
    LayerBounds current{input_lower, input_upper};
    for (std::size_t k = 0; k < net.depth(); ++k) {
        LayerBounds pre = affine_interval(net.affine(k), current);
        if (k + 1 == net.depth()) {
            out.output = std::move(pre);
            break;
        }
        if (!apply_splits(pre, splits, k)) return std::nullopt;
        current = relu_interval(pre);
        out.preactivation.push_back(std::move(pre));
        out.activation.push_back(current);
    }
    return out;
}

IntervalBounds ibp_propagate(const Network& net, const Vector& input_lower, const Vector& input_upper) {
    return *ibp_propagate(net, input_lower, input_upper, PhaseAssignment{});
}

Vector last_layer_margins(const AffineLayer& last, const LayerBounds& penultimate, int y0) {
    const auto classes = static_cast<Eigen::Index>(last.out_dim());
    Vector margins(classes);
    for (Eigen::Index y = 0; y < classes; ++y) {
        if (y == y0) {
            margins[y] = kInfinity;
            continue;
        }
        const Vector diff = (last.weights.row(y0) - last.weights.row(y)).transpose();
        const Vector center = (penultimate.lower + penultimate.upper) * 0.5;
        const Vector radius = (penultimate.upper - penultimate.lower) * 0.5;
        margins[y] = diff.dot(center) - diff.cwiseAbs().dot(radius) + (last.bias[y0] - last.bias[y]);
    }
    return margins;
}

Vector ibp_margins(const Network& net, const VerificationProblem& problem,
                   const std::vector<LayerBounds>& preactivation) {
    if (preactivation.size() != net.num_hidden_layers()) {
        throw Error(ErrorKind::DimensionMismatch, "expected one bound per hidden layer");
    }
    const LayerBounds penultimate = preactivation.empty()
                                        ? LayerBounds{problem.box_lower(), problem.box_upper()}
                                        : relu_interval(preactivation.back());
    return last_layer_margins(net.affine(net.depth() - 1), penultimate, problem.y0);
}

VerificationResult ibp_verify(const VerificationProblem& problem, const Network& net) {
    problem.validate(net.input_dim(), net.num_classes());
    const IntervalBounds bounds = ibp_propagate(net, problem.box_lower(), problem.box_upper());
    VerificationResult result;
    result.margins = ibp_margins(net, problem, bounds.preactivation);
    result.verdict = verdict_from_margins(result.margins, problem.y0);
    return result;
}

} // namespace certkit
