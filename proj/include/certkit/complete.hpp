// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "certkit/deadline.hpp"
#include "certkit/linear.hpp"

#include <optional>

namespace certkit {

enum class BabBounding { Interval, Polyhedra, LpFull };
enum class BranchRule {
    LargestGap,    // unstable neuron with the widest u - l
    FirstUnstable, // first unstable neuron in layer-major order
};

BabBounding parse_bab_bounding(std::string_view text);

struct BabConfig {
    double timeout_s = 60.0;
    BabBounding bounding = BabBounding::LpFull;
    BranchRule branch_rule = BranchRule::LargestGap;
    RelaxSpec relax{};
    std::size_t pgd_steps = 20;
};

enum class CompleteOutcome {
    Robust,
    NotRobust,
    Timeout,
    // The exact margin sits inside the soundness band: no proof, no concrete
    // counterexample.
    Indeterminate,
};

struct CompleteVerdict {
    CompleteOutcome outcome = CompleteOutcome::Timeout;
    std::optional<Vector> counterexample;
    std::size_t branches_explored = 0;
    double wall_time_s = 0.0;
    // Per class: smallest certified lower bound over the closed branches, or
    // the concrete margin at the counterexample.
    Vector margins;
};

/// Complete branch-and-bound verification on ReLU phases (Linf only).
CompleteVerdict bab_verify(const VerificationProblem& problem, const Network& net, const BabConfig& config = {},
                           const Deadline& deadline = Deadline::never());

VerificationResult to_verification_result(const CompleteVerdict& verdict);

/// Exact min over the ball of f_{y0} - f_y for every y, by enumerating all
/// feasible activation patterns (LP per pattern). Linf only; refuses when more
/// than `max_unstable` neurons are unstable under interval bounds.
struct ExactMargins {
    Vector margins;               // entry y0 is +inf
    std::vector<Vector> minimizers; // per class; empty vector for y0
    std::size_t regions = 0;      // feasible complete patterns visited
};

ExactMargins brute_force_margin(const VerificationProblem& problem, const Network& net,
                                std::size_t max_unstable = 16);

} // namespace certkit
