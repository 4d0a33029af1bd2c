// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "certkit/network.hpp"

#include <optional>

namespace certkit {

struct AttackConfig {
    std::size_t steps = 100;
    std::optional<double> step_size; // defaults to eps / 50
    std::size_t restarts = 1;
    bool random_start = true;
    Norm norm = Norm::Linf;
    std::uint64_t seed = 0;
    bool clip = false;
};

struct AttackResult {
    bool found = false;
    Vector adversarial;
    std::size_t restart = 0;
    std::size_t step = 0;
};

/// Projected gradient ascent on the cross-entropy loss inside the eps-ball.
/// Returns the first iterate that the network misclassifies.
AttackResult pgd(const Network& net, const Vector& x0, int y0, double eps, const AttackConfig& config = {});

/// Targeted search used inside branch-and-bound: ascends f_target - f_{y0}
/// from `start`, projected onto the problem's region. Returns a point the
/// network misclassifies, if one is met.
std::optional<Vector> pgd_margin_search(const Network& net, const VerificationProblem& problem, int target,
                                        const Vector& start, std::size_t steps, double step_size);

} // namespace certkit
