// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "certkit/network.hpp"

#include <optional>
#include <vector>

namespace certkit {

/// Per-neuron bounds; lower <= upper componentwise.
struct LayerBounds {
    Vector lower;
    Vector upper;

    std::size_t size() const { return static_cast<std::size_t>(lower.size()); }
    bool contains(const Vector& v, double tol = 0.0) const;
};

struct IntervalBounds {
    std::vector<LayerBounds> preactivation; // one per hidden layer
    std::vector<LayerBounds> activation;    // post-ReLU, one per hidden layer
    LayerBounds output;
};

/// Interval image of an affine map: W+ l + W- u + b, W+ u + W- l + b.
LayerBounds affine_interval(const AffineLayer& layer, const LayerBounds& in);

LayerBounds relu_interval(const LayerBounds& pre);

/// Propagates the box [input_lower, input_upper] through every layer.
IntervalBounds ibp_propagate(const Network& net, const Vector& input_lower, const Vector& input_upper);

/// Same, restricted to the sub-region where the split neurons have the
/// assigned sign. Returns nullopt when a split contradicts the bounds.
std::optional<IntervalBounds> ibp_propagate(const Network& net, const Vector& input_lower,
                                            const Vector& input_upper, const PhaseAssignment& splits);

/// Tightens `bounds` (bounds of hidden layer `layer`) with the layer's split
/// phases. Returns false when the region becomes empty.
bool apply_splits(LayerBounds& bounds, const PhaseAssignment& splits, std::size_t layer);

/// Lower bounds of f_{y0} - f_y for every y, obtained by applying the
/// row difference (w_{y0} - w_y) of the last layer to `penultimate`
/// (bounds of the last layer's input). Entry y0 is +inf.
Vector last_layer_margins(const AffineLayer& last, const LayerBounds& penultimate, int y0);

/// IBP verifier. Non-Linf balls are replaced by their enclosing box.
VerificationResult ibp_verify(const VerificationProblem& problem, const Network& net);

/// IBP margins given already-computed pre-activation bounds.
Vector ibp_margins(const Network& net, const VerificationProblem& problem,
                   const std::vector<LayerBounds>& preactivation);

} // namespace certkit
