// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "certkit/io.hpp"
#include "certkit/verifier.hpp"

#include <string>
#include <vector>

namespace certkit {

struct NamedVerifier {
    std::string name;
    VerifierConfig config;
};

struct BenchmarkConfig {
    std::vector<NamedVerifier> verifiers;
    std::vector<std::string> models;
    std::string dataset;
    std::size_t sample_count = 100;
    double eps = 0.0;
    Norm norm = Norm::Linf;
    double timeout_s = 60.0;         // per instance, certified accuracy
    double radius_timeout_s = 120.0; // per sample, radius search
    double radius_precision = 1e-3;
    bool radius = true;              // run the radius search
    std::size_t pgd_restarts = 1;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string output_dir = ".";
};

/// Reads the JSON benchmark description. Relative paths resolve against the
/// config file's directory.
BenchmarkConfig load_benchmark_config(const std::string& path);

struct CellStats {
    double certified_accuracy = 0.0;
    double mean_time_s = 0.0;
    std::size_t timeouts = 0;
};

/// Fraction of samples the verifier proves Robust within `timeout_s` each.
/// Misclassified samples, timeouts and Unknown count as not verified.
CellStats certified_accuracy(const VerifierFn& verifier, const Network& net,
                             const std::vector<LabeledSample>& samples, double eps, Norm norm, double timeout_s,
                             std::size_t jobs = 1);

/// Largest eps in [0, 0.5] the verifier proves, by bisection down to
/// `precision` or until the per-sample budget runs out. 0 for misclassified
/// samples.
double certified_radius(const VerifierFn& verifier, const Network& net, const LabeledSample& sample, Norm norm,
                        double precision, double timeout_s);

double avg_certified_radius(const VerifierFn& verifier, const Network& net,
                            const std::vector<LabeledSample>& samples, Norm norm, double precision,
                            double timeout_s, std::size_t jobs = 1);

/// Sorted indices of a uniform subsample of size k from n items.
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

struct ReportRow {
    std::string model;
    std::string verifier; // verifier name, or "clean" / "pgd" for protocol rows
    double eps = 0.0;
    Norm norm = Norm::Linf;
    double certified_accuracy = 0.0;
    std::optional<double> avg_radius;
    double mean_time_s = 0.0;
    std::size_t timeouts = 0;
};

struct BenchmarkReport {
    std::vector<ReportRow> rows;
};

BenchmarkReport run_benchmark(const BenchmarkConfig& config);

/// CSV with header model,verifier,eps,norm,certified_accuracy,avg_radius,
/// mean_time_s,timeouts. `zero_timing` writes every time as 0.
std::string report_csv(const BenchmarkReport& report, bool zero_timing = false);
BenchmarkReport parse_report_csv(const std::string& text);

/// Aligned text table: one row per verifier (protocol rows first), one column
/// per model, cells are certified accuracy in percent.
std::string report_table(const BenchmarkReport& report);

/// Runs the benchmark and writes report.csv and report.txt into the output
/// directory (created if needed). Returns the table.
std::string run_benchmark_files(const BenchmarkConfig& config, bool zero_timing = false);

} // namespace certkit
