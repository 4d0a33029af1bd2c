// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "certkit/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace certkit::testing {

/// Independent forward pass written with plain loops.
inline std::vector<double> naive_forward(const Network& net, const std::vector<double>& x) {
    std::vector<double> act = x;
    for (std::size_t k = 0; k < net.depth(); ++k) {
        const AffineLayer& layer = net.affine(k);
        std::vector<double> next(layer.out_dim(), 0.0);
        for (std::size_t i = 0; i < layer.out_dim(); ++i) {
            double sum = layer.bias[static_cast<Eigen::Index>(i)];
            for (std::size_t j = 0; j < layer.in_dim(); ++j) {
                sum += layer.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * act[j];
            }
            next[i] = (k + 1 < net.depth()) ? std::max(sum, 0.0) : sum;
        }
        act = std::move(next);
    }
    return act;
}

inline Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
    return v;
}

/// Uniform point in the perturbation box (Linf) or ball (L2/L1, by rejection
/// from the box followed by projection for safety).
inline Vector random_point_in(const VerificationProblem& p, std::mt19937_64& rng) {
    const Vector lo = p.box_lower();
    const Vector hi = p.box_upper();
    Vector x(lo.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::uniform_real_distribution<double>(lo[i], hi[i])(rng);
    if (p.norm == Norm::Linf) return x;
    return p.project(x);
}

/// Corner of the Linf box chosen by a random sign pattern.
inline Vector random_corner(const VerificationProblem& p, std::mt19937_64& rng) {
    const Vector lo = p.box_lower();
    const Vector hi = p.box_upper();
    Vector x(lo.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = (rng() & 1U) ? lo[i] : hi[i];
    return x;
}

inline Network random_net(std::vector<std::size_t> widths, std::uint64_t seed) {
    return make_random_network(widths, seed);
}

/// Scratch directory under the build tree, emptied on construction.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("certkit_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Standard normal quantile by bisection on erfc, independent of the library.
inline double erf_bisection_quantile(double p) {
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Class 1 iff w.x > offset; class 0 otherwise.
inline Network halfspace(const Vector& w, double offset) {
    Matrix weights = Matrix::Zero(2, w.size());
    weights.row(1) = w.transpose();
    Vector bias = Vector::Zero(2);
    bias[1] = -offset;
    return Network(std::vector<AffineLayer>{{weights, bias}});
}

} // namespace certkit::testing
