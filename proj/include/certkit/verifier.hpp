// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "certkit/complete.hpp"
#include "certkit/smoothing.hpp"

#include <functional>
#include <string>

namespace certkit {

enum class VerifierKind { Ibp, Crown, LpFull, Bab, Lipschitz, Smooth };

VerifierKind parse_verifier_kind(std::string_view text);
std::string_view to_string(VerifierKind kind);

struct VerifierConfig {
    VerifierKind kind = VerifierKind::Ibp;
    RelaxSpec relax{};
    BoundSource crown_bounds = BoundSource::Polyhedra; // intermediate bounds for crown and lpfull
    BabConfig bab{};
    SmoothingDistribution noise{};
    SmoothConfig smooth{};

    /// Sets one option from text; keys: relax, bounds, bounding, branch,
    /// timeout, pgd_steps, noise, sigma, lambda, halfwidth, n0, n, alpha,
    /// seed, jobs. Throws InvalidArgument for unknown keys or bad values.
    void set(std::string_view key, std::string_view value);
};

VerifierConfig make_verifier_config(std::string_view kind);

/// Runs the configured verifier. An expired deadline yields Timeout.
VerificationResult run_verifier(const VerifierConfig& config, const Network& net,
                                const VerificationProblem& problem, const Deadline& deadline = Deadline::never());

using VerifierFn = std::function<VerificationResult(const Network&, const VerificationProblem&, const Deadline&)>;

VerifierFn make_verifier(VerifierConfig config);

} // namespace certkit
