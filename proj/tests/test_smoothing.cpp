// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/smoothing.hpp"
#include "support.hpp"

#include <doctest.h>

#include <boost/math/distributions/binomial.hpp>

using namespace certkit;
using namespace certkit::testing;

namespace {

Network constant_classifier(std::size_t dim, int cls) {
    Vector bias = Vector::Zero(3);
    bias[cls] = 1.0;
    return Network(std::vector<AffineLayer>{{Matrix::Zero(3, static_cast<Eigen::Index>(dim)), bias}});
}

} // namespace

TEST_CASE("sample counts on trivial classifiers") {
    const Network net = constant_classifier(3, 0);
    const auto counts = sample_counts(net, Vector::Constant(3, 0.5), SmoothingDistribution::gaussian(0.5), 1234, 1);
    CHECK(counts[0] == 1234);
    CHECK(counts[1] + counts[2] == 0);
    const auto one = sample_counts(net, Vector::Constant(3, 0.5), SmoothingDistribution::laplace(1.0), 1, 9);
    CHECK(one[0] + one[1] + one[2] == 1);
}

TEST_CASE("halfspace counts match the Gaussian projection") {
    Vector w(3);
    w << 1.0, -2.0, 0.5;
    const Network net = halfspace(w, 0.3);
    const Vector x0 = Vector::Constant(3, 0.5);
    const double sigma = 0.4;
    const double p = normal_cdf((w.dot(x0) - 0.3) / (sigma * w.norm()));
    const std::size_t n = 100000;
    const auto counts = sample_counts(net, x0, SmoothingDistribution::gaussian(sigma), n, 17);
    const double freq = static_cast<double>(counts[1]) / static_cast<double>(n);
    CHECK(std::abs(freq - p) <= 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(n)));
}

TEST_CASE("sampling does not depend on the number of workers") {
    const Network net = random_net({4, 8, 3}, 6);
    const Vector x0 = Vector::Constant(4, 0.5);
    const auto dist = SmoothingDistribution::gaussian(0.3);
    const auto one = sample_counts(net, x0, dist, 10500, 3, 1);
    CHECK(sample_counts(net, x0, dist, 10500, 3, 4) == one);
    CHECK(sample_counts(net, x0, dist, 10500, 3, 1) == one);
}

TEST_CASE("binomial tail matches boost") {
    for (const auto& [k, n, p] : std::vector<std::tuple<std::size_t, std::size_t, double>>{
             {900, 1000, 0.88}, {5, 10, 0.3}, {1, 50, 0.01}, {49990, 100000, 0.5}, {10, 10, 0.9}, {300, 1000, 0.4}}) {
        const boost::math::binomial_distribution<double> dist(static_cast<double>(n), p);
        const double oracle = boost::math::cdf(boost::math::complement(dist, static_cast<double>(k) - 1.0));
        CHECK(binomial_upper_tail(k, n, p) == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("Clopper-Pearson lower bound") {
    CHECK(binom_lower_confidence(0, 100, 0.001) == 0.0);
    CHECK(binom_lower_confidence(100, 100, 0.001) == doctest::Approx(std::pow(0.001, 0.01)).epsilon(1e-15));
    CHECK(binom_lower_confidence(100, 100, 0.001) == doctest::Approx(0.93325).epsilon(1e-5));

    const double p = binom_lower_confidence(900, 1000, 0.001);
    const boost::math::binomial_distribution<double> at(1000.0, p);
    CHECK(boost::math::cdf(boost::math::complement(at, 899.0)) == doctest::Approx(0.001).epsilon(1e-9));
    for (const auto& [k, n] : std::vector<std::pair<std::size_t, std::size_t>>{{900, 1000}, {7, 10}, {9500, 10000}, {51, 100}}) {
        const double oracle = boost::math::binomial_distribution<double>::find_lower_bound_on_p(
            static_cast<double>(n), static_cast<double>(k), 0.001);
        CHECK(binom_lower_confidence(k, n, 0.001) == doctest::Approx(oracle).epsilon(1e-9));
        CHECK(binom_lower_confidence(k, n, 0.001) <= static_cast<double>(k) / static_cast<double>(n));
    }
}

TEST_CASE("inverse normal cdf matches an erf bisection") {
    for (double p : {1e-10, 1e-5, 0.001, 0.02, 0.1, 0.3, 0.5, 0.7, 0.9, 0.975, 0.999, 0.999999}) {
        CHECK(std::abs(inverse_normal_cdf(p) - erf_bisection_quantile(p)) < 1e-9);
    }
    CHECK(inverse_normal_cdf(0.999) == doctest::Approx(3.0902).epsilon(1e-4));
}

TEST_CASE("Gaussian l2 radius") {
    CHECK(certify_gaussian_l2(0.5, 1.0) == 0.0);
    CHECK(certify_gaussian_l2(0.3, 1.0) == 0.0);
    CHECK(certify_gaussian_l2(0.999, 0.5) == doctest::Approx(0.5 * erf_bisection_quantile(0.999)).epsilon(1e-9));
    CHECK(certify_gaussian_l2(0.999, 0.5) == doctest::Approx(1.5451).epsilon(1e-4));
    CHECK_THROWS_AS(certify_gaussian_l2(1.2, 1.0), Error);
    // Neyman-Pearson check: the radius is where the shifted mass reaches one half.
    for (double pa : {0.6, 0.75, 0.9, 0.99, 0.9999}) {
        for (double sigma : {0.12, 0.5, 1.0}) {
            const double q = erf_bisection_quantile(pa);
            double lo = 0.0, hi = 100.0;
            for (int i = 0; i < 200; ++i) {
                const double mid = 0.5 * (lo + hi);
                if (normal_cdf(q - mid / sigma) > 0.5) lo = mid;
                else hi = mid;
            }
            CHECK(std::abs(certify_gaussian_l2(pa, sigma) - lo) < 1e-6);
        }
    }
}

TEST_CASE("Laplace l1 radius") {
    CHECK(certify_laplace_l1(0.5, 1.0) == 0.0);
    CHECK(certify_laplace_l1(0.75, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // Worst case: the whole budget shifts one coordinate against the
    // halfspace {x > t} carrying mass pA at the origin.
    for (double pa : {0.6, 0.8, 0.95}) {
        const double lambda = 0.7;
        const double t = lambda * std::log(2.0 * (1.0 - pa));
        auto mass = [&](double r) {
            const double s = t + r;
            return s < 0 ? 1.0 - 0.5 * std::exp(s / lambda) : 0.5 * std::exp(-s / lambda);
        };
        CHECK(mass(0.0) == doctest::Approx(pa).epsilon(1e-12));
        double lo = 0.0, hi = 50.0;
        for (int i = 0; i < 200; ++i) {
            const double r = 0.5 * (lo + hi);
            if (mass(r) > 0.5) lo = r;
            else hi = r;
        }
        CHECK(std::abs(certify_laplace_l1(pa, lambda) - lo) < 1e-9);
    }
    double previous = 0.0;
    for (int i = 1; i <= 100; ++i) {
        const double r = certify_laplace_l1(0.5 + 0.4999 * i / 100.0, 1.0);
        CHECK(r > previous);
        previous = r;
    }
}

TEST_CASE("l2 to linf conversion") {
    CHECK(convert_l2_to_linf(1.0, 1) == 1.0);
    CHECK(convert_l2_to_linf(1.0, 4) == 0.5);
    CHECK(convert_l2_to_linf(1.5451, 784) == doctest::Approx(0.05518).epsilon(1e-4));
}

TEST_CASE("smoothed prediction") {
    const Network constant = constant_classifier(2, 2);
    const auto noise = SmoothingDistribution::gaussian(1.0);
    // ceil(log2(1000)) = 10 samples suffice for a unanimous class.
    CHECK(predict_smooth(constant, Vector::Zero(2), noise, 10, 0.001, 0) == 2);
    CHECK_FALSE(predict_smooth(constant, Vector::Zero(2), noise, 9, 0.001, 0).has_value());

    // On the decision boundary the two classes split evenly: abstain.
    Vector w(2);
    w << 1.0, 1.0;
    const Network boundary = halfspace(w, 1.0);
    int abstained = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        abstained += predict_smooth(boundary, Vector::Constant(2, 0.5), noise, 1000, 0.001, seed) ? 0 : 1;
    }
    CHECK(abstained >= 98);
}

TEST_CASE("certification pipeline") {
    const Network constant = constant_classifier(3, 1);
    SmoothConfig cfg;
    cfg.n = 100;
    cfg.n0 = 10;
    const SmoothCertificate cert = certify(constant, Vector::Constant(3, 0.5), SmoothingDistribution::gaussian(0.5), cfg);
    REQUIRE(cert.predicted == 1);
    CHECK(cert.pa_lower == doctest::Approx(std::pow(0.001, 0.01)).epsilon(1e-15));
    CHECK(cert.radius_l2 == doctest::Approx(0.5 * erf_bisection_quantile(cert.pa_lower)).epsilon(1e-9));
    CHECK(cert.radius_linf == cert.radius_l2 / std::sqrt(3.0));

    const SmoothCertificate lap = certify(constant, Vector::Constant(3, 0.5), SmoothingDistribution::laplace(0.5), cfg);
    CHECK(lap.radius_l1 == doctest::Approx(certify_laplace_l1(lap.pa_lower, 0.5)));

    // Identical seeds give identical certificates; abstain zeroes the radii.
    Vector w(2);
    w << 1.0, 1.0;
    const Network boundary = halfspace(w, 1.0);
    cfg.n = 2000;
    cfg.n0 = 100;
    const SmoothCertificate a = certify(boundary, Vector::Constant(2, 0.5), SmoothingDistribution::gaussian(1.0), cfg);
    const SmoothCertificate b = certify(boundary, Vector::Constant(2, 0.5), SmoothingDistribution::gaussian(1.0), cfg);
    CHECK(a.pa_lower == b.pa_lower);
    CHECK_FALSE(a.predicted.has_value());
    CHECK(a.radius_l2 == 0.0);
    CHECK(a.radius_l1 == 0.0);
    CHECK(a.radius_linf == 0.0);
}

TEST_CASE("halfspace certificates are conservative") {
    // True smoothed probability 0.9 for class 1.
    const double sigma = 1.0;
    Vector w(2);
    w << 1.0, 0.0;
    const double shift = erf_bisection_quantile(0.9) * sigma;
    const Network net = halfspace(w, 0.5 - shift);
    const double truth = sigma * erf_bisection_quantile(0.9);
    SmoothConfig cfg;
    cfg.n0 = 100;
    cfg.n = 2000;
    int over = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        cfg.seed = seed;
        const SmoothCertificate c = certify(net, Vector::Constant(2, 0.5), SmoothingDistribution::gaussian(sigma), cfg);
        if (c.predicted == 1 && c.radius_l2 > truth) ++over;
    }
    CHECK(over <= 1);
}
