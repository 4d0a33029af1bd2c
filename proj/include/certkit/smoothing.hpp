// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "certkit/network.hpp"

#include <optional>
#include <random>
#include <vector>

namespace certkit {

enum class NoiseKind { Gaussian, Laplace, Uniform };

/// Additive i.i.d. per-coordinate noise. `scale` is the standard deviation
/// (Gaussian), the Laplace scale, or the uniform half-width.
struct SmoothingDistribution {
    NoiseKind kind = NoiseKind::Gaussian;
    double scale = 0.25;

    static SmoothingDistribution gaussian(double sigma) { return {NoiseKind::Gaussian, sigma}; }
    static SmoothingDistribution laplace(double lambda) { return {NoiseKind::Laplace, lambda}; }
    static SmoothingDistribution uniform(double half_width) { return {NoiseKind::Uniform, half_width}; }

    void validate() const;
    double draw(std::mt19937_64& rng) const;
};

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view text);

/// Class histogram of predict(x0 + noise) over `n` draws. Draws come in fixed
/// chunks with seed-derived streams, so the result does not depend on `jobs`.
std::vector<std::size_t> sample_counts(const Network& net, const Vector& x0, const SmoothingDistribution& dist,
                                       std::size_t n, std::uint64_t seed, std::size_t jobs = 1);

/// P[Bin(n, p) >= k].
double binomial_upper_tail(std::size_t k, std::size_t n, double p);

/// Exact one-sided Clopper-Pearson lower confidence bound at level alpha:
/// the p where P[Bin(n, p) >= k] = alpha.
double binom_lower_confidence(std::size_t k, std::size_t n, double alpha);

double normal_cdf(double x);
double inverse_normal_cdf(double p);

double certify_gaussian_l2(double pa_lower, double sigma);
double certify_laplace_l1(double pa_lower, double lambda);
double convert_l2_to_linf(double radius_l2, std::size_t dim);

/// Top class of the smoothed classifier, or nullopt (abstain) when the
/// one-sided test P[Bin(n, 1/2) >= top count] <= alpha fails.
std::optional<int> predict_smooth(const Network& net, const Vector& x0, const SmoothingDistribution& dist,
                                  std::size_t n, double alpha, std::uint64_t seed, std::size_t jobs = 1);

struct SmoothConfig {
    std::size_t n0 = 1000;
    std::size_t n = 100000;
    double alpha = 0.001;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

struct SmoothCertificate {
    std::optional<int> predicted; // nullopt = abstain
    double pa_lower = 0.0;
    double radius_l2 = 0.0;
    double radius_l1 = 0.0;
    double radius_linf = 0.0;
    std::size_t selection_samples = 0;
    std::size_t estimation_samples = 0;
    double alpha = 0.0;

    double radius(Norm norm) const;
};

/// Selection pass on n0 draws, estimation pass on n fresh draws, closed-form
/// radii from the lower confidence bound of the selected class.
SmoothCertificate certify(const Network& net, const Vector& x0, const SmoothingDistribution& dist,
                          const SmoothConfig& config = {});

/// Robust iff the smoothed prediction equals y0 and its radius in the
/// problem's norm exceeds eps.
VerificationResult smooth_verify(const VerificationProblem& problem, const Network& net,
                                 const SmoothingDistribution& dist, const SmoothConfig& config = {});

} // namespace certkit
