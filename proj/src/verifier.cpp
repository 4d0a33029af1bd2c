// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/verifier.hpp"

#include "certkit/lipschitz.hpp"
#include "certkit/lp_verify.hpp"

#include <charconv>
#include <string>

namespace certkit {

namespace {

double parse_real(std::string_view key, std::string_view text) {
    double value = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size()) {
        throw Error(ErrorKind::InvalidArgument, "option '" + std::string(key) + "' expects a number");
    }
    return value;
}

std::uint64_t parse_count(std::string_view key, std::string_view text) {
    std::uint64_t value = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size()) {
        throw Error(ErrorKind::InvalidArgument, "option '" + std::string(key) + "' expects a non-negative integer");
    }
    return value;
}

BoundSource parse_bound_source(std::string_view text) {
    if (text == "interval") return BoundSource::Interval;
    if (text == "polyhedra") return BoundSource::Polyhedra;
    throw Error(ErrorKind::InvalidArgument, "unknown bound source '" + std::string(text) + "'");
}

VerificationResult timed_out(const Network& net, int y0) {
    VerificationResult result;
    result.verdict = Verdict::Timeout;
    result.margins = Vector::Constant(static_cast<Eigen::Index>(net.num_classes()), -kInfinity);
    result.margins[y0] = kInfinity;
    return result;
}

} // namespace

VerifierKind parse_verifier_kind(std::string_view text) {
    if (text == "ibp") return VerifierKind::Ibp;
    if (text == "crown") return VerifierKind::Crown;
    if (text == "lpfull") return VerifierKind::LpFull;
    if (text == "bab") return VerifierKind::Bab;
    if (text == "lipschitz") return VerifierKind::Lipschitz;
    if (text == "smooth") return VerifierKind::Smooth;
    throw Error(ErrorKind::InvalidArgument, "unknown verifier '" + std::string(text) + "'");
}

std::string_view to_string(VerifierKind kind) {
    switch (kind) {
    case VerifierKind::Ibp: return "ibp";
    case VerifierKind::Crown: return "crown";
    case VerifierKind::LpFull: return "lpfull";
    case VerifierKind::Bab: return "bab";
    case VerifierKind::Lipschitz: return "lipschitz";
    case VerifierKind::Smooth: return "smooth";
    }
    return "?";
}

void VerifierConfig::set(std::string_view key, std::string_view value) {
    if (key == "relax") {
        relax = parse_relax(value);
        bab.relax = relax;
    } else if (key == "bounds") {
        crown_bounds = parse_bound_source(value);
    } else if (key == "bounding") {
        bab.bounding = parse_bab_bounding(value);
    } else if (key == "branch") {
        if (value == "largest_gap") bab.branch_rule = BranchRule::LargestGap;
        else if (value == "first_unstable") bab.branch_rule = BranchRule::FirstUnstable;
        else throw Error(ErrorKind::InvalidArgument, "unknown branch rule '" + std::string(value) + "'");
    } else if (key == "timeout") {
        bab.timeout_s = parse_real(key, value);
        if (!(bab.timeout_s > 0.0)) throw Error(ErrorKind::InvalidArgument, "timeout must be positive");
    } else if (key == "pgd_steps") {
        bab.pgd_steps = parse_count(key, value);
    } else if (key == "noise") {
        noise.kind = parse_noise_kind(value);
    } else if (key == "sigma" || key == "lambda" || key == "halfwidth") {
        noise.kind = key == "sigma" ? NoiseKind::Gaussian : key == "lambda" ? NoiseKind::Laplace : NoiseKind::Uniform;
        noise.scale = parse_real(key, value);
        noise.validate();
    } else if (key == "n0") {
        smooth.n0 = parse_count(key, value);
    } else if (key == "n") {
        smooth.n = parse_count(key, value);
    } else if (key == "alpha") {
        smooth.alpha = parse_real(key, value);
    } else if (key == "seed") {
        smooth.seed = parse_count(key, value);
    } else if (key == "jobs") {
        smooth.jobs = parse_count(key, value);
    } else {
        throw Error(ErrorKind::InvalidArgument, "unknown verifier option '" + std::string(key) + "'");
    }
}

VerifierConfig make_verifier_config(std::string_view kind) {
    VerifierConfig config;
    config.kind = parse_verifier_kind(kind);
    return config;
}

VerificationResult run_verifier(const VerifierConfig& config, const Network& net,
                                const VerificationProblem& problem, const Deadline& deadline) {
    problem.validate(net.input_dim(), net.num_classes());
    if (deadline.expired()) return timed_out(net, problem.y0);
    VerificationResult result;
    switch (config.kind) {
    case VerifierKind::Ibp: result = ibp_verify(problem, net); break;
    case VerifierKind::Crown: result = crown_verify(problem, net, config.relax, config.crown_bounds); break;
    case VerifierKind::LpFull:
        result = lp_full_verify(problem, net, preactivation_bounds(problem, net, config.crown_bounds, config.relax));
        break;
    case VerifierKind::Bab: return to_verification_result(bab_verify(problem, net, config.bab, deadline));
    case VerifierKind::Lipschitz: result = lipschitz_verify(problem, net); break;
    case VerifierKind::Smooth: result = smooth_verify(problem, net, config.noise, config.smooth); break;
    }
    if (deadline.expired()) return timed_out(net, problem.y0);
    return result;
}

VerifierFn make_verifier(VerifierConfig config) {
    return [config = std::move(config)](const Network& net, const VerificationProblem& problem,
                                        const Deadline& deadline) {
        return run_verifier(config, net, problem, deadline);
    };
}

} // namespace certkit
