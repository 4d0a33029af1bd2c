// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/complete.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace certkit;
using namespace certkit::testing;

namespace {

double exact_min_margin(const ExactMargins& exact, int y0) {
    double m = kInfinity;
    for (Eigen::Index y = 0; y < exact.margins.size(); ++y) {
        if (y != y0) m = std::min(m, exact.margins[y]);
    }
    return m;
}

} // namespace

TEST_CASE("brute force agrees with a dense grid on 2-D inputs") {
    std::mt19937_64 rng(51);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Network net = random_net({2, 6, 6, 3}, 900 + seed);
        const Vector x0 = random_vector(rng, 2);
        const VerificationProblem p{x0, predict(net, x0), 0.1, Norm::Linf, false};
        const ExactMargins exact = brute_force_margin(p, net);
        Vector grid = Vector::Constant(3, kInfinity);
        const int steps = 200;
        for (int i = 0; i <= steps; ++i) {
            for (int j = 0; j <= steps; ++j) {
                Vector x = x0;
                x[0] += p.eps * (2.0 * i / steps - 1.0);
                x[1] += p.eps * (2.0 * j / steps - 1.0);
                const Vector f = forward(net, x);
                for (Eigen::Index y = 0; y < 3; ++y) {
                    if (y != p.y0) grid[y] = std::min(grid[y], f[p.y0] - f[y]);
                }
            }
        }
        for (Eigen::Index y = 0; y < 3; ++y) {
            if (y == p.y0) continue;
            // Exact minimum never exceeds any sampled value and the grid gets close.
            CHECK(exact.margins[y] <= grid[y] + 1e-9);
            CHECK(grid[y] - exact.margins[y] <= 0.05);
            const Vector& xm = exact.minimizers[static_cast<std::size_t>(y)];
            REQUIRE(xm.size() == 2);
            CHECK(p.contains(xm));
            const Vector f = forward(net, xm);
            CHECK(f[p.y0] - f[y] == doctest::Approx(exact.margins[y]).epsilon(1e-7));
        }
    }
}

TEST_CASE("brute force refuses too many unstable neurons") {
    const Network net = random_net({2, 30, 30, 2}, 3);
    const VerificationProblem p{Vector::Constant(2, 0.5), 0, 0.5, Norm::Linf, false};
    CHECK_THROWS_AS(brute_force_margin(p, net, 4), Error);
}

TEST_CASE("branch and bound agrees with brute force") {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> eps_dist(0.01, 0.3);
    int robust = 0, not_robust = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const Network net = random_net({2, 5, 5, 3}, 1000 + seed);
        const Vector x0 = random_vector(rng, 2);
        const VerificationProblem p{x0, predict(net, x0), eps_dist(rng), Norm::Linf, false};
        const double exact = exact_min_margin(brute_force_margin(p, net), p.y0);
        for (const BabBounding bounding : {BabBounding::Interval, BabBounding::Polyhedra, BabBounding::LpFull}) {
            BabConfig config;
            config.bounding = bounding;
            const CompleteVerdict v = bab_verify(p, net, config);
            if (std::abs(exact) < 1e-6) continue;
            if (exact > 0) {
                CHECK(v.outcome == CompleteOutcome::Robust);
            } else {
                REQUIRE(v.outcome == CompleteOutcome::NotRobust);
                REQUIRE(v.counterexample.has_value());
                CHECK(p.contains(*v.counterexample));
                CHECK(predict(net, *v.counterexample) != p.y0);
            }
        }
        (exact > 0 ? robust : not_robust) += 1;
    }
    // The suite must exercise both outcomes.
    CHECK(robust > 0);
    CHECK(not_robust > 0);
}

TEST_CASE("a region with only stable neurons needs a single branch") {
    Matrix w1(2, 2);
    w1 << 1, 0, 0, 1;
    Vector b1(2);
    b1 << 1, 1;
    Matrix w2(2, 2);
    w2 << 1, 0, 0, 0;
    const Network net(std::vector<AffineLayer>{{w1, b1}, {w2, Vector::Zero(2)}});
    const VerificationProblem p{Vector::Constant(2, 0.5), 0, 0.1, Norm::Linf, false};
    const CompleteVerdict v = bab_verify(p, net);
    CHECK(v.outcome == CompleteOutcome::Robust);
    CHECK(v.branches_explored == 1);
}

TEST_CASE("branch and bound reports a timeout when the budget is gone") {
    const Network net = random_net({2, 8, 8, 3}, 5);
    const VerificationProblem p{Vector::Constant(2, 0.5), predict(net, Vector::Constant(2, 0.5)), 0.3, Norm::Linf,
                                false};
    const CompleteVerdict v = bab_verify(p, net, BabConfig{}, Deadline::after(0.0));
    CHECK(v.outcome == CompleteOutcome::Timeout);
    CHECK(to_verification_result(v).verdict == Verdict::Timeout);
}

TEST_CASE("branching rules reach the same verdicts") {
    std::mt19937_64 rng(57);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Network net = random_net({2, 4, 4, 2}, 2000 + seed);
        const Vector x0 = random_vector(rng, 2);
        const VerificationProblem p{x0, predict(net, x0), 0.15, Norm::Linf, false};
        BabConfig first;
        first.branch_rule = BranchRule::FirstUnstable;
        first.bounding = BabBounding::Polyhedra;
        const auto a = bab_verify(p, net, first).outcome;
        const auto b = bab_verify(p, net).outcome;
        CHECK(a == b);
    }
}

TEST_CASE("branch and bound rejects non-linf problems") {
    const Network net = random_net({2, 3, 2}, 1);
    CHECK_THROWS_AS(bab_verify(VerificationProblem{Vector::Zero(2), 0, 0.1, Norm::L2, false}, net), Error);
    CHECK(parse_bab_bounding("lpfull") == BabBounding::LpFull);
    CHECK_THROWS_AS(parse_bab_bounding("milp"), Error);
}
