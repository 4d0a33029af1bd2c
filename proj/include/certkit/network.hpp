// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "certkit/types.hpp"

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace certkit {

struct AffineLayer {
    Matrix weights; // out_dim x in_dim
    Vector bias;    // out_dim

    std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }
};

struct ReluLayer {};

using Layer = std::variant<AffineLayer, ReluLayer>;

/// Feed-forward ReLU classifier: affine layers separated by elementwise ReLU.
/// Immutable after construction.
class Network {
public:
    /// Validates structure: affine first and last, strict alternation,
    /// chained dimensions. Throws Error(MalformedDimensions) otherwise.
    explicit Network(const std::vector<Layer>& layers);
    explicit Network(std::vector<AffineLayer> affine);

    std::size_t input_dim() const { return affine_.front().in_dim(); }
    std::size_t num_classes() const { return affine_.back().out_dim(); }

    /// Number of affine layers; hidden (ReLU) layers number one fewer.
    std::size_t depth() const { return affine_.size(); }
    std::size_t num_hidden_layers() const { return affine_.size() - 1; }
    std::size_t hidden_width(std::size_t k) const { return affine_[k].out_dim(); }
    std::size_t total_hidden_neurons() const;

    const AffineLayer& affine(std::size_t k) const { return affine_[k]; }
    const std::vector<AffineLayer>& affine_layers() const { return affine_; }
    std::vector<Layer> layers() const;

    /// Empty assignment shaped like this network's hidden layers.
    PhaseAssignment unfixed_phases() const;

private:
    void validate() const;

    std::vector<AffineLayer> affine_;
};

/// Logits of `net` at `x`.
Vector forward(const Network& net, const Vector& x);

/// Forward pass that also records every pre-activation vector (one per
/// affine layer, the last being the logits).
std::vector<Vector> forward_trace(const Network& net, const Vector& x);

/// Argmax with ties broken towards the lowest index.
int argmax(const Vector& v);
int predict(const Network& net, const Vector& x);

/// Gradient of grad_logits . f(x) with respect to x. ReLU'(0) = 0.
Vector backward_input(const Network& net, const Vector& x, const Vector& grad_logits);

/// Random network with uniform fan-in initialisation U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
/// widths = {input_dim, hidden..., num_classes}.
Network make_random_network(std::span<const std::size_t> widths, std::uint64_t seed);

/// Softmax cross-entropy and its gradient with respect to the logits.
double cross_entropy(const Vector& logits, int label, Vector* grad = nullptr);

} // namespace certkit
