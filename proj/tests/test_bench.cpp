// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/bench.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

using namespace certkit;
using namespace certkit::testing;

namespace {

VerifierFn constant_verdict(Verdict verdict) {
    return [verdict](const Network&, const VerificationProblem&, const Deadline&) {
        VerificationResult r;
        r.verdict = verdict;
        return r;
    };
}

std::vector<LabeledSample> correct_samples(const Network& net, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<LabeledSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const Vector x = random_vector(rng, static_cast<Eigen::Index>(net.input_dim()));
        out.push_back({x, predict(net, x)});
    }
    return out;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("certified accuracy with trivial verifiers") {
    const Network net = random_net({3, 4, 2}, 1);
    auto samples = correct_samples(net, 10, 2);
    CHECK(certified_accuracy(constant_verdict(Verdict::Robust), net, samples, 0.1, Norm::Linf, 60).certified_accuracy == 1.0);
    const CellStats timeouts = certified_accuracy(constant_verdict(Verdict::Timeout), net, samples, 0.1, Norm::Linf, 60);
    CHECK(timeouts.certified_accuracy == 0.0);
    CHECK(timeouts.timeouts == 10);
    CHECK(certified_accuracy(constant_verdict(Verdict::Unknown), net, samples, 0.1, Norm::Linf, 60).certified_accuracy == 0.0);

    // Misclassified samples never count, whatever the verifier says.
    for (std::size_t i = 0; i < 4; ++i) samples[i].y = 1 - samples[i].y;
    CHECK(certified_accuracy(constant_verdict(Verdict::Robust), net, samples, 0.1, Norm::Linf, 60).certified_accuracy ==
          doctest::Approx(0.6));
}

TEST_CASE("a real verifier that runs out of time counts as not verified") {
    const Network net = random_net({2, 8, 8, 3}, 7);
    const auto samples = correct_samples(net, 5, 3);
    VerifierConfig bab = make_verifier_config("bab");
    const CellStats s = certified_accuracy(make_verifier(bab), net, samples, 0.3, Norm::Linf, 1e-9);
    CHECK(s.certified_accuracy == 0.0);
    CHECK(s.timeouts == 5);
}

TEST_CASE("radius search on linear models recovers margin over the l1 row gap") {
    Matrix w(2, 3);
    w << 0.5, -0.25, 0.1, -0.3, 0.2, 0.4;
    Vector b(2);
    b << 0.05, -0.05;
    const Network net(std::vector<AffineLayer>{{w, b}});
    const auto samples = correct_samples(net, 20, 5);
    const VerifierFn ibp = make_verifier(make_verifier_config("ibp"));
    for (const auto& s : samples) {
        const Vector f = forward(net, s.x);
        const int other = 1 - s.y;
        const double expected = std::min(0.5, (f[s.y] - f[other]) / (w.row(s.y) - w.row(other)).lpNorm<1>());
        const double r = certified_radius(ibp, net, s, Norm::Linf, 1e-3, 120);
        CHECK(r <= expected + 1e-12);
        CHECK(expected - r <= 1e-3 + 1e-12);
    }
    LabeledSample wrong = samples.front();
    wrong.y = 1 - wrong.y;
    CHECK(certified_radius(ibp, net, wrong, Norm::Linf, 1e-3, 120) == 0.0);
}

TEST_CASE("radius ordering across verifiers") {
    const Network net = random_net({2, 5, 5, 2}, 17);
    const auto samples = correct_samples(net, 5, 9);
    VerifierConfig ibp = make_verifier_config("ibp");
    VerifierConfig crown = make_verifier_config("crown");
    crown.set("bounds", "interval");
    crown.set("relax", "zero");
    VerifierConfig lp = make_verifier_config("lpfull");
    lp.set("bounds", "interval");
    VerifierConfig bab = make_verifier_config("bab");
    double prev = 0.0;
    for (const VerifierConfig& v : {ibp, crown, lp, bab}) {
        const double r = avg_certified_radius(make_verifier(v), net, samples, Norm::Linf, 1e-3, 120);
        CHECK(r >= prev - 1e-3);
        prev = r;
    }
}

TEST_CASE("subsample indices are deterministic and distinct") {
    const auto a = subsample_indices(100, 10, 5);
    CHECK(a == subsample_indices(100, 10, 5));
    CHECK(a != subsample_indices(100, 10, 6));
    CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
    CHECK(subsample_indices(5, 5, 1) == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK_THROWS_AS(subsample_indices(5, 6, 1), Error);
}

TEST_CASE("benchmark run writes one row per cell plus protocol rows") {
    const auto dir = scratch_dir("bench");
    const Network a = random_net({2, 6, 2}, 1);
    const Network b = random_net({2, 6, 2}, 2);
    save_network(a, (dir / "alpha.json").string());
    save_network(b, (dir / "beta.json").string());
    save_dataset(correct_samples(a, 30, 4), (dir / "data.csv").string());
    std::ofstream(dir / "bench.json") << R"({
  "models": ["alpha.json", "beta.json"],
  "dataset": "data.csv",
  "sample_count": 8,
  "eps": 0.05,
  "norm": "linf",
  "verifiers": ["ibp", {"name": "crown-zero", "kind": "crown", "options": {"relax": "zero"}}],
  "radius_precision": 0.01,
  "seed": 3,
  "output_dir": "out"
})";
    const BenchmarkConfig cfg = load_benchmark_config((dir / "bench.json").string());
    CHECK(cfg.models.size() == 2);
    CHECK(cfg.verifiers[1].config.relax.mode == RelaxMode::FixedLambda);
    const BenchmarkReport report = run_benchmark(cfg);
    CHECK(report.rows.size() == 2 * (2 + 2));
    std::map<std::string, double> clean, pgd_acc;
    for (const ReportRow& r : report.rows) {
        if (r.verifier == "clean") clean[r.model] = r.certified_accuracy;
        if (r.verifier == "pgd") pgd_acc[r.model] = r.certified_accuracy;
    }
    for (const ReportRow& r : report.rows) {
        if (r.verifier == "clean" || r.verifier == "pgd") continue;
        CHECK(r.certified_accuracy <= pgd_acc[r.model] + 1e-12);
        CHECK(pgd_acc[r.model] <= clean[r.model] + 1e-12);
        CHECK(r.avg_radius.has_value());
    }

    run_benchmark_files(cfg, true);
    const std::string csv = read_file(dir / "out" / "report.csv");
    run_benchmark_files(cfg, true);
    CHECK(read_file(dir / "out" / "report.csv") == csv);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 8);
    const BenchmarkReport parsed = parse_report_csv(csv);
    CHECK(parsed.rows.size() == 8);
    CHECK(report_table(parsed) == read_file(dir / "out" / "report.txt"));
}

TEST_CASE("benchmark config errors") {
    const auto dir = scratch_dir("bench_errors");
    CHECK_THROWS_AS(load_benchmark_config((dir / "none.json").string()), Error);
    std::ofstream(dir / "bad.json") << R"({"models": ["m.json"], "dataset": "d.csv", "eps": 0.1, "verifiers": ["ibp"], "colour": 1})";
    CHECK_THROWS_AS(load_benchmark_config((dir / "bad.json").string()), Error);
    std::ofstream(dir / "missing.json") << R"({"models": ["nope.json"], "dataset": "d.csv", "eps": 0.1, "verifiers": ["ibp"]})";
    const BenchmarkConfig cfg = load_benchmark_config((dir / "missing.json").string());
    try {
        run_benchmark(cfg);
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("d.csv") != std::string::npos);
    }
}
