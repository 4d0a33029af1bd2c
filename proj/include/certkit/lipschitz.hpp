// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "certkit/network.hpp"

namespace certkit {

struct LipschitzCertificate {
    double global_lipschitz = 0.0; // l2 -> l2 constant of the logit map
    Matrix pair_lipschitz;         // (y, y') -> constant of f_y - f_y'
    double certified_radius = 0.0;
};

/// Largest singular value by power iteration on W^T W. Returns 0 for an
/// all-zero matrix.
double spectral_norm(const Matrix& w, std::size_t max_iterations = 200, double tol = 1e-10);

/// Global Lipschitz bounds of `net` plus the l2 radius certified at `x0`.
LipschitzCertificate lipschitz_certificate(const Network& net, const Vector& x0, int y0);

/// L2 only: Robust iff eps < radius - soundness margin.
VerificationResult lipschitz_verify(const VerificationProblem& problem, const Network& net);

} // namespace certkit
