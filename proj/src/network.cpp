// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/network.hpp"

#include <cmath>
#include <random>

namespace certkit {

Network::Network(const std::vector<Layer>& layers) {
    if (layers.empty()) throw Error(ErrorKind::MalformedDimensions, "network has no layers");
    bool expect_affine = true;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const bool is_affine = std::holds_alternative<AffineLayer>(layers[i]);
        if (is_affine != expect_affine) {
            throw Error(ErrorKind::MalformedDimensions,
                        "layer " + std::to_string(i) +
                            ": affine and relu layers must alternate, starting and ending with affine");
        }
        if (is_affine) affine_.push_back(std::get<AffineLayer>(layers[i]));
        expect_affine = !expect_affine;
    }
    if (expect_affine) {
        throw Error(ErrorKind::MalformedDimensions, "last layer must be affine");
    }
    validate();
}

Network::Network(std::vector<AffineLayer> affine) : affine_(std::move(affine)) {
    if (affine_.empty()) throw Error(ErrorKind::MalformedDimensions, "network has no layers");
    validate();
}

void Network::validate() const {
    for (std::size_t k = 0; k < affine_.size(); ++k) {
        const auto& layer = affine_[k];
        if (layer.weights.rows() == 0 || layer.weights.cols() == 0) {
            throw Error(ErrorKind::MalformedDimensions,
                        "affine layer " + std::to_string(k) + " has an empty weight matrix");
        }
        if (layer.bias.size() != layer.weights.rows()) {
            throw Error(ErrorKind::MalformedDimensions,
                        "affine layer " + std::to_string(k) + ": bias length " +
                            std::to_string(layer.bias.size()) + " != rows " +
                            std::to_string(layer.weights.rows()));
        }
        if (k > 0 && affine_[k - 1].out_dim() != layer.in_dim()) {
            throw Error(ErrorKind::MalformedDimensions,
                        "affine layer " + std::to_string(k) + " expects " +
                            std::to_string(layer.in_dim()) + " inputs, previous layer produces " +
                            std::to_string(affine_[k - 1].out_dim()));
        }
    }
}

std::size_t Network::total_hidden_neurons() const {
    std::size_t total = 0;
    for (std::size_t k = 0; k < num_hidden_layers(); ++k) total += hidden_width(k);
    return total;
}

std::vector<Layer> Network::layers() const {
    std::vector<Layer> out;
    for (std::size_t k = 0; k < affine_.size(); ++k) {
        if (k > 0) out.emplace_back(ReluLayer{});
        out.emplace_back(affine_[k]);
    }
    return out;
}

PhaseAssignment Network::unfixed_phases() const {
    PhaseAssignment phases(num_hidden_layers());
    for (std::size_t k = 0; k < phases.size(); ++k) phases[k].assign(hidden_width(k), Phase::Unfixed);
    return phases;
}

namespace {

void check_input(const Network& net, const Vector& x) {
    if (static_cast<std::size_t>(x.size()) != net.input_dim()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "input has dimension " + std::to_string(x.size()) + ", network expects " +
                        std::to_string(net.input_dim()));
    }
}

} // namespace

Vector forward(const Network& net, const Vector& x) {
    check_input(net, x);
    Vector z = x;
    const std::size_t depth = net.depth();
    for (std::size_t k = 0; k < depth; ++k) {
        const auto& layer = net.affine(k);
        Vector next = layer.weights * z + layer.bias;
        if (k + 1 < depth) next = next.cwiseMax(0.0);
        z = std::move(next);
    }
    return z;
}

std::vector<Vector> forward_trace(const Network& net, const Vector& x) {
    check_input(net, x);
    std::vector<Vector> pre;
    pre.reserve(net.depth());
    Vector z = x;
    for (std::size_t k = 0; k < net.depth(); ++k) {
        const auto& layer = net.affine(k);
        pre.push_back(layer.weights * z + layer.bias);
        z = pre.back().cwiseMax(0.0);
    }
    return pre;
}

int argmax(const Vector& v) {
    int best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = static_cast<int>(i);
    }
    return best;
}

int predict(const Network& net, const Vector& x) { return argmax(forward(net, x)); }

Vector backward_input(const Network& net, const Vector& x, const Vector& grad_logits) {
    if (static_cast<std::size_t>(grad_logits.size()) != net.num_classes()) {
        throw Error(ErrorKind::DimensionMismatch, "gradient has dimension " +
                                                      std::to_string(grad_logits.size()) +
                                                      ", network has " +
                                                      std::to_string(net.num_classes()) + " classes");
    }
    const auto pre = forward_trace(net, x);
    Vector g = grad_logits;
    for (std::size_t k = net.depth(); k-- > 0;) {
        g = net.affine(k).weights.transpose() * g;
        if (k > 0) {
            const Vector& below = pre[k - 1];
            for (Eigen::Index j = 0; j < g.size(); ++j) {
                if (!(below[j] > 0.0)) g[j] = 0.0;
            }
        }
    }
    return g;
}

Network make_random_network(std::span<const std::size_t> widths, std::uint64_t seed) {
    if (widths.size() < 2) {
        throw Error(ErrorKind::InvalidArgument, "need at least input and output widths");
    }
    std::mt19937_64 rng(seed);
    std::vector<AffineLayer> layers;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
        const auto in = static_cast<Eigen::Index>(widths[k]);
        const auto out = static_cast<Eigen::Index>(widths[k + 1]);
        if (in == 0 || out == 0) throw Error(ErrorKind::InvalidArgument, "layer widths must be positive");
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        AffineLayer layer{Matrix(out, in), Vector(out)};
        for (Eigen::Index r = 0; r < out; ++r)
            for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = dist(rng);
        for (Eigen::Index r = 0; r < out; ++r) layer.bias[r] = dist(rng);
        layers.push_back(std::move(layer));
    }
    return Network(std::move(layers));
}

double cross_entropy(const Vector& logits, int label, Vector* grad) {
    const double peak = logits.maxCoeff();
    Vector shifted = (logits.array() - peak).exp();
    const double total = shifted.sum();
    const double loss = std::log(total) + peak - logits[label];
    if (grad != nullptr) {
        *grad = shifted / total;
        (*grad)[label] -= 1.0;
    }
    return loss;
}

} // namespace certkit
