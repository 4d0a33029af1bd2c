// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/smoothing.hpp"

#include "certkit/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

namespace certkit {

namespace {

constexpr std::size_t kChunk = 1000;

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::Range, std::string(what) + " must lie in [0, 1]");
}

// Row-batched forward pass; returns argmax per row (ties to the lowest index).
void count_predictions(const Network& net, Matrix inputs, std::vector<std::size_t>& counts) {
    Matrix act = std::move(inputs);
    for (std::size_t k = 0; k < net.depth(); ++k) {
        const AffineLayer& layer = net.affine(k);
        Matrix next = act * layer.weights.transpose();
        next.rowwise() += layer.bias.transpose();
        if (k + 1 < net.depth()) next = next.cwiseMax(0.0);
        act = std::move(next);
    }
    for (Eigen::Index r = 0; r < act.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < act.cols(); ++c) {
            if (act(r, c) > act(r, best)) best = c;
        }
        ++counts[static_cast<std::size_t>(best)];
    }
}

std::vector<std::size_t> count_chunks(const Network& net, const Vector& x0, const SmoothingDistribution& dist,
                                      std::size_t n, std::uint64_t seed, std::size_t first, std::size_t stride) {
    std::vector<std::size_t> counts(net.num_classes(), 0);
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    const auto dim = x0.size();
    for (std::size_t c = first; c < chunks; c += stride) {
        const std::size_t rows = std::min(kChunk, n - c * kChunk);
        std::mt19937_64 rng(derive_seed(seed, {c}));
        Matrix inputs(static_cast<Eigen::Index>(rows), dim);
        for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
            for (Eigen::Index i = 0; i < dim; ++i) inputs(r, i) = x0[i] + dist.draw(rng);
        }
        count_predictions(net, std::move(inputs), counts);
    }
    return counts;
}

double log_binomial_pmf(std::size_t i, std::size_t n, double log_p, double log_q) {
    const auto di = static_cast<double>(i);
    const auto dn = static_cast<double>(n);
    return std::lgamma(dn + 1.0) - std::lgamma(di + 1.0) - std::lgamma(dn - di + 1.0) + di * log_p +
           (dn - di) * log_q;
}

// Sum of pmf terms from `start` moving away from the mode; the terms shrink
// monotonically, so summation stops once they are negligible.
double tail_away_from_mode(std::size_t start, std::size_t n, double p, bool upward) {
    const double log_p = std::log(p);
    const double log_q = std::log1p(-p);
    double log_sum = -kInfinity;
    for (std::size_t i = start;; upward ? ++i : --i) {
        const double term = log_binomial_pmf(i, n, log_p, log_q);
        if (log_sum == -kInfinity) {
            log_sum = term;
        } else {
            const double hi = std::max(log_sum, term);
            log_sum = hi + std::log(std::exp(log_sum - hi) + std::exp(term - hi));
        }
        if (term < log_sum - 40.0) break;
        if (upward ? i == n : i == 0) break;
    }
    return std::exp(log_sum);
}

} // namespace

void SmoothingDistribution::validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw Error(ErrorKind::InvalidArgument, "smoothing scale must be positive and finite");
    }
}

double SmoothingDistribution::draw(std::mt19937_64& rng) const {
    switch (kind) {
    case NoiseKind::Gaussian: return std::normal_distribution<double>(0.0, scale)(rng);
    case NoiseKind::Laplace: {
        const double u = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
        const double sign = u < 0.0 ? -1.0 : 1.0;
        return -scale * sign * std::log1p(-2.0 * std::abs(u));
    }
    case NoiseKind::Uniform: return std::uniform_real_distribution<double>(-scale, scale)(rng);
    }
    return 0.0;
}

std::string_view to_string(NoiseKind kind) {
    switch (kind) {
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::Laplace: return "laplace";
    case NoiseKind::Uniform: return "uniform";
    }
    return "?";
}

NoiseKind parse_noise_kind(std::string_view text) {
    if (text == "gaussian") return NoiseKind::Gaussian;
    if (text == "laplace") return NoiseKind::Laplace;
    if (text == "uniform") return NoiseKind::Uniform;
    throw Error(ErrorKind::InvalidArgument, "unknown noise distribution '" + std::string(text) + "'");
}

std::vector<std::size_t> sample_counts(const Network& net, const Vector& x0, const SmoothingDistribution& dist,
                                       std::size_t n, std::uint64_t seed, std::size_t jobs) {
    dist.validate();
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "sample count must be at least 1");
    if (static_cast<std::size_t>(x0.size()) != net.input_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "input dimension does not match the network");
    }
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    const std::size_t workers = std::clamp<std::size_t>(jobs, 1, chunks);
    if (workers == 1) return count_chunks(net, x0, dist, n, seed, 0, 1);

    std::vector<std::vector<std::size_t>> partial(workers);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] { partial[w] = count_chunks(net, x0, dist, n, seed, w, workers); });
    }
    for (auto& t : threads) t.join();
    std::vector<std::size_t> counts(net.num_classes(), 0);
    for (const auto& part : partial) {
        for (std::size_t c = 0; c < counts.size(); ++c) counts[c] += part[c];
    }
    return counts;
}

double binomial_upper_tail(std::size_t k, std::size_t n, double p) {
    if (k == 0) return 1.0;
    if (k > n) return 0.0;
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    const double mode = std::floor((static_cast<double>(n) + 1.0) * p);
    if (static_cast<double>(k) >= mode) return std::min(1.0, tail_away_from_mode(k, n, p, true));
    return std::max(0.0, 1.0 - tail_away_from_mode(k - 1, n, p, false));
}

double binom_lower_confidence(std::size_t k, std::size_t n, double alpha) {
    if (k > n) throw Error(ErrorKind::InvalidArgument, "success count exceeds trials");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::Range, "alpha must lie in (0, 1)");
    if (k == 0) return 0.0;
    if (k == n) return std::pow(alpha, 1.0 / static_cast<double>(n));
    double lo = 0.0;
    double hi = static_cast<double>(k) / static_cast<double>(n);
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (binomial_upper_tail(k, n, mid) < alpha) lo = mid;
        else hi = mid;
    }
    return lo; // tail(lo) <= alpha: never above the exact bound
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double inverse_normal_cdf(double p) {
    check_probability(p, "probability");
    if (p == 0.0) return -kInfinity;
    if (p == 1.0) return kInfinity;
    // Rational approximation (relative error ~1e-9), then one Newton step.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x = 0.0;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    if (density > 0.0) x -= (normal_cdf(x) - p) / density;
    return x;
}

double certify_gaussian_l2(double pa_lower, double sigma) {
    check_probability(pa_lower, "pA lower bound");
    if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive");
    if (pa_lower <= 0.5) return 0.0;
    return sigma * inverse_normal_cdf(pa_lower);
}

double certify_laplace_l1(double pa_lower, double lambda) {
    check_probability(pa_lower, "pA lower bound");
    if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be positive");
    if (pa_lower <= 0.5) return 0.0;
    return -lambda * std::log(2.0 * (1.0 - pa_lower));
}

double convert_l2_to_linf(double radius_l2, std::size_t dim) {
    if (dim == 0) throw Error(ErrorKind::InvalidArgument, "dimension must be at least 1");
    return radius_l2 / std::sqrt(static_cast<double>(dim));
}

std::optional<int> predict_smooth(const Network& net, const Vector& x0, const SmoothingDistribution& dist,
                                  std::size_t n, double alpha, std::uint64_t seed, std::size_t jobs) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::Range, "alpha must lie in (0, 1)");
    const auto counts = sample_counts(net, x0, dist, n, seed, jobs);
    const auto top = std::max_element(counts.begin(), counts.end()) - counts.begin();
    if (binomial_upper_tail(counts[static_cast<std::size_t>(top)], n, 0.5) > alpha) return std::nullopt;
    return static_cast<int>(top);
}

double SmoothCertificate::radius(Norm norm) const {
    switch (norm) {
    case Norm::Linf: return radius_linf;
    case Norm::L2: return radius_l2;
    case Norm::L1: return radius_l1;
    }
    return 0.0;
}

SmoothCertificate certify(const Network& net, const Vector& x0, const SmoothingDistribution& dist,
                          const SmoothConfig& config) {
    if (config.n0 == 0 || config.n == 0) throw Error(ErrorKind::InvalidArgument, "sample counts must be positive");
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw Error(ErrorKind::Range, "alpha must lie in (0, 1)");
    SmoothCertificate cert;
    cert.selection_samples = config.n0;
    cert.estimation_samples = config.n;
    cert.alpha = config.alpha;

    const auto selection = sample_counts(net, x0, dist, config.n0, derive_seed(config.seed, {0}), config.jobs);
    const auto candidate = std::max_element(selection.begin(), selection.end()) - selection.begin();
    const auto estimation = sample_counts(net, x0, dist, config.n, derive_seed(config.seed, {1}), config.jobs);
    cert.pa_lower = binom_lower_confidence(estimation[static_cast<std::size_t>(candidate)], config.n, config.alpha);
    if (cert.pa_lower <= 0.5) return cert;

    cert.predicted = static_cast<int>(candidate);
    const auto dim = static_cast<std::size_t>(x0.size());
    const double root_d = std::sqrt(static_cast<double>(dim));
    switch (dist.kind) {
    case NoiseKind::Gaussian:
        cert.radius_l2 = certify_gaussian_l2(cert.pa_lower, dist.scale);
        cert.radius_l1 = cert.radius_l2; // the l1 ball sits inside the l2 ball of equal radius
        cert.radius_linf = convert_l2_to_linf(cert.radius_l2, dim);
        break;
    case NoiseKind::Laplace:
        cert.radius_l1 = certify_laplace_l1(cert.pa_lower, dist.scale);
        cert.radius_l2 = cert.radius_l1 / root_d;
        cert.radius_linf = cert.radius_l1 / static_cast<double>(dim);
        break;
    case NoiseKind::Uniform: break; // prediction only
    }
    return cert;
}

VerificationResult smooth_verify(const VerificationProblem& problem, const Network& net,
                                 const SmoothingDistribution& dist, const SmoothConfig& config) {
    problem.validate(net.input_dim(), net.num_classes());
    const SmoothCertificate cert = certify(net, problem.x0, dist, config);
    VerificationResult result;
    result.margins = Vector::Constant(static_cast<Eigen::Index>(net.num_classes()), -kInfinity);
    result.margins[problem.y0] = kInfinity;
    result.radius = cert.radius(problem.norm);
    if (!cert.predicted) {
        result.verdict = Verdict::Abstain;
    } else if (*cert.predicted != problem.y0) {
        result.verdict = Verdict::Unknown;
        result.diagnostic = "smoothed prediction is class " + std::to_string(*cert.predicted);
    } else {
        result.verdict = *result.radius > problem.eps ? Verdict::Robust : Verdict::Unknown;
    }
    return result;
}

} // namespace certkit
