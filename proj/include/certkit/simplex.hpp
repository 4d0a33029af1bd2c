// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "certkit/types.hpp"

namespace certkit {

/// minimize objective . x  s.t.  a x <= b,  lower <= x <= upper.
/// Bounds may be infinite.
struct LinearProgram {
    Vector objective;
    Matrix a;
    Vector b;
    Vector lower;
    Vector upper;

    std::size_t num_variables() const { return static_cast<std::size_t>(objective.size()); }
    std::size_t num_constraints() const { return static_cast<std::size_t>(a.rows()); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    Vector x;
    double value = 0.0;
    std::size_t iterations = 0;
};

struct SimplexOptions {
    double tol = 1e-9;
    std::size_t max_iterations = 50000;
};

/// Dense two-phase tableau simplex with Bland's anti-cycling rule.
/// Throws Error(SolverStalled) when the iteration cap is reached.
LpResult simplex_solve(const LinearProgram& lp, const SimplexOptions& options = {});

} // namespace certkit
