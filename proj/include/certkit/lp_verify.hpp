// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "certkit/interval.hpp"
#include "certkit/simplex.hpp"

namespace certkit {

/// Triangle-relaxation LP of the network over an Linf box. Variables are the
/// input followed by every hidden post-activation. Affine layers become paired
/// inequalities; split neurons additionally carry their sign constraint.
struct RelaxedNetworkLp {
    LinearProgram lp;
    double objective_offset = 0.0;
    std::size_t input_dim = 0;
};

/// Encodes min logit_objective . f(x) over the relaxation.
RelaxedNetworkLp encode_relaxed_lp(const Network& net, const VerificationProblem& problem,
                                   const std::vector<LayerBounds>& preactivation, const PhaseAssignment& splits,
                                   const Vector& logit_objective);

struct RelaxedLpSolution {
    LpStatus status = LpStatus::Infeasible;
    double value = 0.0; // lower bound of the objective (when Optimal)
    Vector input;       // input part of the minimiser (when Optimal)
};

RelaxedLpSolution solve_relaxed_lp(const Network& net, const VerificationProblem& problem,
                                   const std::vector<LayerBounds>& preactivation, const PhaseAssignment& splits,
                                   const Vector& logit_objective, const SimplexOptions& options = {});

/// LP-full verifier: one LP per competitor class. Linf only.
VerificationResult lp_full_verify(const VerificationProblem& problem, const Network& net,
                                  const std::vector<LayerBounds>& preactivation,
                                  const SimplexOptions& options = {});

/// Convenience overload computing Polyhedra pre-activation bounds first.
VerificationResult lp_full_verify(const VerificationProblem& problem, const Network& net);

} // namespace certkit
