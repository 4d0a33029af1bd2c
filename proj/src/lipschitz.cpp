// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/lipschitz.hpp"

#include "certkit/random.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace certkit {

double spectral_norm(const Matrix& w, std::size_t max_iterations, double tol) {
    if (max_iterations == 0) throw Error(ErrorKind::InvalidArgument, "spectral_norm needs at least one iteration");
    if (w.size() == 0 || w.cwiseAbs().maxCoeff() == 0.0) return 0.0;

    std::mt19937_64 rng(derive_seed(0x5eed, {static_cast<std::uint64_t>(w.rows()),
                                              static_cast<std::uint64_t>(w.cols())}));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector v(w.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gauss(rng);
    v.normalize();

    double sigma = 0.0;
    for (std::size_t it = 0; it < max_iterations; ++it) {
        const Vector wv = w * v;
        Vector next = w.transpose() * wv;
        const double length = next.norm();
        if (length == 0.0) break; // start vector in the null space
        next /= length;
        const double estimate = (w * next).norm();
        v = std::move(next);
        const bool converged = std::abs(estimate - sigma) <= tol * std::max(estimate, 1e-300);
        sigma = estimate;
        if (converged) break;
    }
    // Power iteration approaches from below; the Frobenius norm caps any
    // overshoot from rounding.
    return std::min(sigma, w.norm());
}

LipschitzCertificate lipschitz_certificate(const Network& net, const Vector& x0, int y0) {
    double hidden_product = 1.0;
    for (std::size_t k = 0; k + 1 < net.depth(); ++k) hidden_product *= spectral_norm(net.affine(k).weights);
    const Matrix& last = net.affine(net.depth() - 1).weights;

    LipschitzCertificate cert;
    cert.global_lipschitz = hidden_product * spectral_norm(last);
    const auto classes = last.rows();
    cert.pair_lipschitz = Matrix::Zero(classes, classes);
    for (Eigen::Index a = 0; a < classes; ++a) {
        for (Eigen::Index b = 0; b < classes; ++b) {
            if (a != b) cert.pair_lipschitz(a, b) = (last.row(a) - last.row(b)).norm() * hidden_product;
        }
    }

    const Vector logits = forward(net, x0);
    double radius = kInfinity;
    for (Eigen::Index y = 0; y < classes; ++y) {
        if (y == y0) continue;
        const double margin = logits[y0] - logits[y];
        const double constant = cert.pair_lipschitz(y0, y);
        double r = 0.0;
        if (margin > 0.0) r = constant > 0.0 ? margin / constant : kInfinity;
        radius = std::min(radius, r);
    }
    cert.certified_radius = classes > 1 ? radius : kInfinity;
    return cert;
}

VerificationResult lipschitz_verify(const VerificationProblem& problem, const Network& net) {
    problem.validate(net.input_dim(), net.num_classes());
    if (problem.norm != Norm::L2) throw Error(ErrorKind::InvalidArgument, "lipschitz verification supports l2 only");
    const LipschitzCertificate cert = lipschitz_certificate(net, problem.x0, problem.y0);

    VerificationResult result;
    const Vector logits = forward(net, problem.x0);
    result.margins = Vector::Constant(logits.size(), kInfinity);
    for (Eigen::Index y = 0; y < logits.size(); ++y) {
        if (y == problem.y0) continue;
        result.margins[y] = logits[problem.y0] - logits[y] - cert.pair_lipschitz(problem.y0, y) * problem.eps;
    }
    result.radius = cert.certified_radius;
    result.verdict = problem.eps < cert.certified_radius - kSoundnessMargin ? Verdict::Robust : Verdict::Unknown;
    return result;
}

} // namespace certkit
