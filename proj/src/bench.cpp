// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/bench.hpp"

#include "certkit/attack.hpp"
#include "certkit/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace certkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Evaluates fn(i) for i in [0, n) on `jobs` threads; results keep index order.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, std::size_t jobs, Fn fn) {
    std::vector<T> out(n);
    const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) out[i] = fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

std::string format_real(const char* pattern, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, value);
    return buf;
}

std::string resolve(const fs::path& base, const std::string& path) {
    const fs::path p(path);
    return p.is_absolute() ? path : (base / p).lexically_normal().string();
}

std::string option_text(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_integer()) return std::to_string(value.get<long long>());
    if (value.is_number()) return format_real("%.17g", value.get<double>());
    if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
    throw Error(ErrorKind::Format, "verifier options must be strings or numbers");
}

NamedVerifier parse_verifier_entry(const json& entry) {
    if (entry.is_string()) {
        const auto name = entry.get<std::string>();
        return {name, make_verifier_config(name)};
    }
    if (!entry.is_object() || !entry.contains("name")) {
        throw Error(ErrorKind::Format, "each verifier needs a name");
    }
    NamedVerifier out;
    out.name = entry.at("name").get<std::string>();
    out.config = make_verifier_config(entry.value("kind", out.name));
    if (entry.contains("options")) {
        for (const auto& [key, value] : entry.at("options").items()) out.config.set(key, option_text(value));
    }
    for (const auto& [key, value] : entry.items()) {
        if (key != "name" && key != "kind" && key != "options") {
            throw Error(ErrorKind::Format, "unknown verifier field '" + key + "'");
        }
    }
    return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_field(const std::string& text, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::Format, "report line " + std::to_string(line) + ": bad number '" + text + "'");
    }
}

} // namespace

BenchmarkConfig load_benchmark_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, "cannot open benchmark config '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Format, path + ": " + e.what());
    }
    const fs::path base = fs::path(path).parent_path();
    BenchmarkConfig config;
    try {
        static const char* known[] = {"models",   "dataset",          "sample_count",     "eps",
                                      "norm",     "verifiers",        "timeout_s",        "radius_timeout_s",
                                      "radius_precision", "radius",   "pgd_restarts",     "seed",
                                      "jobs",     "output_dir"};
        for (const auto& [key, value] : doc.items()) {
            if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
                throw Error(ErrorKind::Format, "unknown config field '" + key + "'");
            }
        }
        for (const auto& m : doc.at("models")) config.models.push_back(resolve(base, m.get<std::string>()));
        config.dataset = resolve(base, doc.at("dataset").get<std::string>());
        for (const auto& v : doc.at("verifiers")) config.verifiers.push_back(parse_verifier_entry(v));
        config.eps = doc.at("eps").get<double>();
        config.norm = parse_norm(doc.value("norm", std::string("linf")));
        config.sample_count = doc.value("sample_count", config.sample_count);
        config.timeout_s = doc.value("timeout_s", config.timeout_s);
        config.radius_timeout_s = doc.value("radius_timeout_s", config.radius_timeout_s);
        config.radius_precision = doc.value("radius_precision", config.radius_precision);
        config.radius = doc.value("radius", config.radius);
        config.pgd_restarts = doc.value("pgd_restarts", config.pgd_restarts);
        config.seed = doc.value("seed", config.seed);
        config.jobs = doc.value("jobs", config.jobs);
        config.output_dir = resolve(base, doc.value("output_dir", std::string(".")));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Format, path + ": " + e.what());
    }
    if (config.models.empty() || config.verifiers.empty()) {
        throw Error(ErrorKind::Format, path + ": models and verifiers must be non-empty");
    }
    if (!(config.timeout_s > 0.0) || !(config.radius_timeout_s > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "timeouts must be positive");
    }
    if (!(config.radius_precision > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius precision must be positive");
    if (!(config.eps >= 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be non-negative");
    return config;
}

CellStats certified_accuracy(const VerifierFn& verifier, const Network& net,
                             const std::vector<LabeledSample>& samples, double eps, Norm norm, double timeout_s,
                             std::size_t jobs) {
    struct Outcome {
        bool verified = false;
        bool timeout = false;
        double seconds = 0.0;
    };
    const auto outcomes = parallel_map<Outcome>(samples.size(), jobs, [&](std::size_t i) {
        const LabeledSample& s = samples[i];
        Outcome o;
        if (predict(net, s.x) != s.y) return o;
        const Stopwatch clock;
        const VerificationResult r = verifier(net, VerificationProblem{s.x, s.y, eps, norm, false},
                                              Deadline::after(timeout_s));
        o.seconds = clock.seconds();
        o.verified = r.verdict == Verdict::Robust;
        o.timeout = r.verdict == Verdict::Timeout;
        return o;
    });
    CellStats stats;
    if (samples.empty()) return stats;
    std::size_t verified = 0;
    double seconds = 0.0;
    for (const Outcome& o : outcomes) {
        verified += o.verified ? 1 : 0;
        stats.timeouts += o.timeout ? 1 : 0;
        seconds += o.seconds;
    }
    stats.certified_accuracy = static_cast<double>(verified) / static_cast<double>(samples.size());
    stats.mean_time_s = seconds / static_cast<double>(samples.size());
    return stats;
}

double certified_radius(const VerifierFn& verifier, const Network& net, const LabeledSample& sample, Norm norm,
                        double precision, double timeout_s) {
    if (predict(net, sample.x) != sample.y) return 0.0;
    const Deadline budget = Deadline::after(timeout_s);
    double lo = 0.0;
    double hi = 0.5;
    while (hi - lo >= precision && !budget.expired()) {
        const double mid = 0.5 * (lo + hi);
        const VerificationResult r = verifier(net, VerificationProblem{sample.x, sample.y, mid, norm, false}, budget);
        if (r.verdict == Verdict::Robust) lo = mid;
        else hi = mid;
    }
    return lo;
}

double avg_certified_radius(const VerifierFn& verifier, const Network& net,
                            const std::vector<LabeledSample>& samples, Norm norm, double precision,
                            double timeout_s, std::size_t jobs) {
    if (samples.empty()) return 0.0;
    const auto radii = parallel_map<double>(samples.size(), jobs, [&](std::size_t i) {
        return certified_radius(verifier, net, samples[i], norm, precision, timeout_s);
    });
    return std::accumulate(radii.begin(), radii.end(), 0.0) / static_cast<double>(samples.size());
}

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k > n) throw Error(ErrorKind::Range, "sample count exceeds the dataset size");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, {0x5a3b1e}));
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = std::uniform_int_distribution<std::size_t>(i, n - 1)(rng);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& config) {
    std::vector<LabeledSample> data;
    try {
        data = load_dataset(config.dataset);
    } catch (const Error& e) {
        throw Error(e.kind(), config.dataset + ": " + e.what());
    }
    std::vector<std::pair<std::string, Network>> models;
    for (const std::string& path : config.models) {
        try {
            models.emplace_back(fs::path(path).stem().string(), load_network(path));
        } catch (const Error& e) {
            throw Error(e.kind(), path + ": " + e.what());
        }
    }
    std::vector<LabeledSample> samples;
    for (std::size_t i : subsample_indices(data.size(), config.sample_count, config.seed)) samples.push_back(data[i]);

    BenchmarkReport report;
    for (const auto& [name, net] : models) {
        for (const LabeledSample& s : samples) {
            if (static_cast<std::size_t>(s.x.size()) != net.input_dim() || s.y < 0 ||
                static_cast<std::size_t>(s.y) >= net.num_classes()) {
                throw Error(ErrorKind::DimensionMismatch, "dataset does not fit model '" + name + "'");
            }
        }
        const double n = samples.empty() ? 1.0 : static_cast<double>(samples.size());
        ReportRow clean{name, "clean", config.eps, config.norm, 0.0, std::nullopt, 0.0, 0};
        for (const LabeledSample& s : samples) clean.certified_accuracy += predict(net, s.x) == s.y ? 1.0 / n : 0.0;
        report.rows.push_back(clean);

        if (config.norm != Norm::L1 && config.eps > 0.0) {
            AttackConfig attack;
            attack.norm = config.norm;
            attack.restarts = config.pgd_restarts;
            const auto robust = parallel_map<int>(samples.size(), config.jobs, [&](std::size_t i) {
                const LabeledSample& s = samples[i];
                if (predict(net, s.x) != s.y) return 0;
                AttackConfig local = attack;
                local.seed = derive_seed(config.seed, {i});
                return pgd(net, s.x, s.y, config.eps, local).found ? 0 : 1;
            });
            ReportRow row{name, "pgd", config.eps, config.norm, 0.0, std::nullopt, 0.0, 0};
            row.certified_accuracy = static_cast<double>(std::accumulate(robust.begin(), robust.end(), 0)) / n;
            report.rows.push_back(row);
        }

        for (const NamedVerifier& v : config.verifiers) {
            const VerifierFn fn = make_verifier(v.config);
            const CellStats stats =
                certified_accuracy(fn, net, samples, config.eps, config.norm, config.timeout_s, config.jobs);
            ReportRow row{name, v.name, config.eps, config.norm, stats.certified_accuracy, std::nullopt,
                          stats.mean_time_s, stats.timeouts};
            if (config.radius) {
                row.avg_radius = avg_certified_radius(fn, net, samples, config.norm, config.radius_precision,
                                                      config.radius_timeout_s, config.jobs);
            }
            report.rows.push_back(row);
        }
    }
    return report;
}

std::string report_csv(const BenchmarkReport& report, bool zero_timing) {
    std::string out = "model,verifier,eps,norm,certified_accuracy,avg_radius,mean_time_s,timeouts\n";
    for (const ReportRow& r : report.rows) {
        out += r.model + ',' + r.verifier + ',' + format_real("%.6g", r.eps) + ',' + std::string(to_string(r.norm)) +
               ',' + format_real("%.6f", r.certified_accuracy) + ',' +
               (r.avg_radius ? format_real("%.6f", *r.avg_radius) : std::string()) + ',' +
               format_real("%.6f", zero_timing ? 0.0 : r.mean_time_s) + ',' + std::to_string(r.timeouts) + '\n';
    }
    return out;
}

BenchmarkReport parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "model,verifier,eps,norm,certified_accuracy,avg_radius,mean_time_s,timeouts") {
        throw Error(ErrorKind::Format, "report is missing the expected header");
    }
    BenchmarkReport report;
    std::size_t number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 8) throw Error(ErrorKind::Format, "report line " + std::to_string(number) + ": expected 8 fields");
        ReportRow r;
        r.model = f[0];
        r.verifier = f[1];
        r.eps = parse_field(f[2], number);
        r.norm = parse_norm(f[3]);
        r.certified_accuracy = parse_field(f[4], number);
        if (!f[5].empty()) r.avg_radius = parse_field(f[5], number);
        r.mean_time_s = parse_field(f[6], number);
        r.timeouts = static_cast<std::size_t>(parse_field(f[7], number));
        report.rows.push_back(r);
    }
    return report;
}

std::string report_table(const BenchmarkReport& report) {
    std::vector<std::string> models;
    std::vector<std::string> verifiers;
    std::map<std::pair<std::string, std::string>, std::string> cells;
    for (const ReportRow& r : report.rows) {
        if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
        if (std::find(verifiers.begin(), verifiers.end(), r.verifier) == verifiers.end()) {
            verifiers.push_back(r.verifier);
        }
        std::string cell = format_real("%.1f%%", 100.0 * r.certified_accuracy);
        if (r.avg_radius) cell += " r=" + format_real("%.4f", *r.avg_radius);
        if (r.timeouts > 0) cell += " t/o=" + std::to_string(r.timeouts);
        cells[{r.verifier, r.model}] = cell;
    }
    std::vector<std::size_t> width(models.size() + 1, 0);
    width[0] = std::string("verifier").size();
    for (const auto& v : verifiers) width[0] = std::max(width[0], v.size());
    for (std::size_t m = 0; m < models.size(); ++m) {
        width[m + 1] = models[m].size();
        for (const auto& v : verifiers) {
            const auto it = cells.find({v, models[m]});
            if (it != cells.end()) width[m + 1] = std::max(width[m + 1], it->second.size());
        }
    }
    auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w - s.size(), ' '); };
    std::string out = pad("verifier", width[0]);
    for (std::size_t m = 0; m < models.size(); ++m) out += " | " + pad(models[m], width[m + 1]);
    out += '\n' + std::string(width[0], '-');
    for (std::size_t m = 0; m < models.size(); ++m) out += "-+-" + std::string(width[m + 1], '-');
    out += '\n';
    for (const auto& v : verifiers) {
        out += pad(v, width[0]);
        for (std::size_t m = 0; m < models.size(); ++m) {
            const auto it = cells.find({v, models[m]});
            out += " | " + pad(it == cells.end() ? std::string("-") : it->second, width[m + 1]);
        }
        out += '\n';
    }
    return out;
}

std::string run_benchmark_files(const BenchmarkConfig& config, bool zero_timing) {
    const BenchmarkReport report = run_benchmark(config);
    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create output directory '" + config.output_dir + "'");
    const std::string table = report_table(report);
    const std::pair<const char*, std::string> files[] = {{"report.csv", report_csv(report, zero_timing)},
                                                         {"report.txt", table}};
    for (const auto& [file, content] : files) {
        const fs::path target = fs::path(config.output_dir) / file;
        std::ofstream out(target, std::ios::binary);
        out << content;
        if (!out) throw Error(ErrorKind::Io, "cannot write '" + target.string() + "'");
    }
    return table;
}

} // namespace certkit
