// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/certkit.h"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

// Exit codes: 0 success, 1 usage, 2 input files, 3 other runtime failures.
struct Failure {
    int code;
    std::string message;
};

int exit_code_for(certkit_status status) {
    switch (status) {
    case CERTKIT_ERR_INVALID_ARGUMENT: return 1;
    case CERTKIT_ERR_RANGE:
    case CERTKIT_ERR_MISSING_FILE:
    case CERTKIT_ERR_IO:
    case CERTKIT_ERR_FORMAT:
    case CERTKIT_ERR_MALFORMED_DIMENSIONS:
    case CERTKIT_ERR_UNSUPPORTED_VERSION:
    case CERTKIT_ERR_DIMENSION: return 2;
    default: return 3;
    }
}

void check(certkit_status status) {
    if (status != CERTKIT_OK) throw Failure{exit_code_for(status), certkit_last_error()};
}

struct NetworkDeleter {
    void operator()(certkit_network* p) const { certkit_network_free(p); }
};
struct DatasetDeleter {
    void operator()(certkit_dataset* p) const { certkit_dataset_free(p); }
};
struct VerifierDeleter {
    void operator()(certkit_verifier* p) const { certkit_verifier_free(p); }
};
using NetworkPtr = std::unique_ptr<certkit_network, NetworkDeleter>;
using DatasetPtr = std::unique_ptr<certkit_dataset, DatasetDeleter>;
using VerifierPtr = std::unique_ptr<certkit_verifier, VerifierDeleter>;

std::string num(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

NetworkPtr load_model(const std::string& path) {
    certkit_network* net = nullptr;
    check(certkit_network_load(path.c_str(), &net));
    return NetworkPtr(net);
}

DatasetPtr load_data(const std::string& path, size_t classes) {
    certkit_dataset* data = nullptr;
    check(certkit_dataset_load(path.c_str(), classes, &data));
    return DatasetPtr(data);
}

certkit_norm parse_norm_flag(const std::string& text) {
    certkit_norm norm = CERTKIT_NORM_LINF;
    check(certkit_norm_parse(text.c_str(), &norm));
    return norm;
}

void check_fits(const certkit_network* net, const certkit_dataset* data) {
    if (certkit_dataset_size(data) > 0 && certkit_dataset_dim(data) != certkit_network_input_dim(net)) {
        throw Failure{2, "dataset has " + std::to_string(certkit_dataset_dim(data)) + " features, model expects " +
                             std::to_string(certkit_network_input_dim(net))};
    }
}

size_t sample_limit(const certkit_dataset* data, size_t limit) {
    const size_t n = certkit_dataset_size(data);
    return limit == 0 ? n : std::min(n, limit);
}

// Runs fn(i) for every sample on `jobs` threads and prints the returned
// records in sample order.
template <typename Fn>
std::vector<std::string> run_ordered(size_t n, size_t jobs, Fn fn) {
    std::vector<std::string> out(n);
    std::vector<std::optional<Failure>> errors(n);
    const size_t workers = std::max<size_t>(1, std::min(jobs, n));
    auto work = [&](size_t w) {
        for (size_t i = w; i < n; i += workers) {
            try {
                out[i] = fn(i);
            } catch (const Failure& f) {
                errors[i] = f;
            }
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
        for (auto& t : threads) t.join();
    }
    for (auto& e : errors) {
        if (e) throw *e;
    }
    return out;
}

std::vector<size_t> parse_widths(const std::string& text) {
    std::vector<size_t> widths;
    if (text.empty()) return widths;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            size_t used = 0;
            const long v = std::stol(item, &used);
            if (used != item.size() || v <= 0) throw std::invalid_argument(item);
            widths.push_back(static_cast<size_t>(v));
        } catch (const std::exception&) {
            throw Failure{1, "--hidden expects comma-separated positive widths"};
        }
    }
    return widths;
}

uint64_t default_seed() {
    if (const char* env = std::getenv("CERTKIT_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw Failure{1, "CERTKIT_SEED must be a non-negative integer"};
        }
    }
    return 0;
}

struct Common {
    std::string model;
    std::string data;
    size_t limit = 0;
    size_t jobs = 1;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"certkit: verification, attacks, training and benchmarks for ReLU classifiers"};
    app.require_subcommand(1);
    app.set_version_flag("--version", certkit_version());

    uint64_t seed = 0;
    bool seed_given = false;
    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Random seed (default: $CERTKIT_SEED or 0)")
            ->each([&](const std::string&) { seed_given = true; });
    };

    // train
    auto* train = app.add_subcommand("train", "Train a classifier and write a model file");
    std::string train_data, train_out, train_mode = "standard", hidden = "16,16", noise_kind = "gaussian";
    certkit_train_options topt;
    certkit_train_options_default(&topt);
    double sigma = 0.0;
    size_t classes = 0;
    train->add_option("--data", train_data, "Training CSV")->required();
    train->add_option("--out", train_out, "Output model path")->required();
    train->add_option("--mode", train_mode, "standard, ibp or noise")
        ->check(CLI::IsMember({"standard", "ibp", "noise"}));
    train->add_option("--hidden", hidden, "Comma-separated hidden widths");
    train->add_option("--classes", classes, "Number of classes (default: largest label + 1)");
    train->add_option("--eps", topt.eps, "Target eps for ibp training");
    train->add_option("--kappa", topt.kappa, "Clean-loss weight")->check(CLI::Range(0.0, 1.0));
    train->add_option("--warmup", topt.warmup_fraction, "Share of steps over which eps ramps up")
        ->check(CLI::Range(0.0, 1.0));
    auto* o_train_sigma = train->add_option("--sigma", sigma, "Noise scale for noise training");
    train->add_option("--noise", noise_kind, "gaussian, laplace or uniform");
    train->add_option("--epochs", topt.epochs, "Epochs");
    train->add_option("--lr", topt.learning_rate, "Learning rate");
    train->add_option("--batch-size", topt.batch_size, "Mini-batch size");
    add_seed(train);

    // verify
    auto* verify = app.add_subcommand("verify", "Verify robustness of every sample in a dataset");
    Common vc;
    std::string verifier_name, norm_text = "linf";
    std::vector<std::string> options;
    double eps = 0.0, timeout = 60.0, precision = 1e-3;
    bool radius = false, timing = false, clip = false;
    verify->add_option("--verifier", verifier_name, "ibp, crown, lpfull, bab, lipschitz or smooth")->required();
    verify->add_option("--model", vc.model, "Model file")->required();
    verify->add_option("--data", vc.data, "Dataset CSV")->required();
    verify->add_option("--eps", eps, "Perturbation radius")->required();
    verify->add_option("--norm", norm_text, "linf, l2 or l1");
    verify->add_option("--timeout", timeout, "Seconds per instance");
    verify->add_option("--option", options, "Verifier option key=value (repeatable)");
    // Named shortcuts for common verifier options, applied before --option.
    std::map<std::string, std::string> named_options;
    const std::pair<const char*, const char*> shortcuts[] = {
        {"relax", "crown/bab lower slope: adaptive, parallel, zero or a value in [0,1]"},
        {"bounding", "bab bounds: interval, crown or lpfull"},
        {"sigma", "smooth: Gaussian noise standard deviation"},
        {"lambda", "smooth: Laplace noise scale"},
        {"halfwidth", "smooth: uniform noise half-width"},
        {"n0", "smooth: selection samples"},
        {"n", "smooth: estimation samples"},
        {"alpha", "smooth: failure probability"},
    };
    for (const auto& [key, help] : shortcuts) verify->add_option(std::string("--") + key, named_options[key], help);
    verify->add_flag("--clip", clip, "Intersect the ball with [0,1]^n");
    verify->add_flag("--radius", radius, "Also search the certified radius on [0, 0.5]");
    verify->add_option("--precision", precision, "Radius search precision");
    verify->add_flag("--timing", timing, "Print wall-clock time per instance");
    verify->add_option("--limit", vc.limit, "Only the first N samples");
    verify->add_option("--jobs", vc.jobs, "Parallel instances");
    add_seed(verify);

    // certify
    auto* cert = app.add_subcommand("certify", "Randomized-smoothing certification");
    Common cc;
    certkit_smooth_options sopt;
    certkit_smooth_options_default(&sopt);
    double cert_sigma = 0.0, cert_lambda = 0.0, cert_half = 0.0, cert_eps = 0.0;
    std::string cert_norm = "l2";
    cert->add_option("--model", cc.model, "Model file")->required();
    cert->add_option("--data", cc.data, "Dataset CSV")->required();
    auto* o_sigma = cert->add_option("--sigma", cert_sigma, "Gaussian noise standard deviation");
    auto* o_lambda = cert->add_option("--lambda", cert_lambda, "Laplace noise scale");
    auto* o_half = cert->add_option("--halfwidth", cert_half, "Uniform noise half-width");
    o_sigma->excludes(o_lambda)->excludes(o_half);
    o_lambda->excludes(o_half);
    cert->add_option("--n0", sopt.n0, "Selection samples");
    cert->add_option("--n", sopt.n, "Estimation samples");
    cert->add_option("--alpha", sopt.alpha, "Failure probability")->check(CLI::Range(1e-300, 0.999999));
    cert->add_option("--eps", cert_eps, "Radius to report a verdict against");
    cert->add_option("--norm", cert_norm, "Norm of --eps");
    cert->add_option("--limit", cc.limit, "Only the first N samples");
    cert->add_option("--jobs", cc.jobs, "Sampling threads");
    add_seed(cert);

    // attack
    auto* attack = app.add_subcommand("attack", "PGD attack on every sample");
    Common ac;
    certkit_attack_options aopt;
    certkit_attack_options_default(&aopt);
    double attack_eps = 0.0;
    std::string attack_norm = "linf";
    attack->add_option("--model", ac.model, "Model file")->required();
    attack->add_option("--data", ac.data, "Dataset CSV")->required();
    attack->add_option("--eps", attack_eps, "Perturbation radius")->required();
    attack->add_option("--norm", attack_norm, "linf or l2");
    attack->add_option("--steps", aopt.steps, "Iterations");
    attack->add_option("--step-size", aopt.step_size, "Step size (default eps/50)");
    attack->add_option("--restarts", aopt.restarts, "Random restarts");
    bool attack_clip = false;
    attack->add_flag("--clip", attack_clip, "Intersect the ball with [0,1]^n");
    attack->add_option("--limit", ac.limit, "Only the first N samples");
    attack->add_option("--jobs", ac.jobs, "Parallel instances");
    add_seed(attack);

    // bench
    auto* bench = app.add_subcommand("bench", "Run a benchmark described by a JSON config");
    std::string bench_config, bench_out;
    bool deterministic = false;
    bench->add_option("--config", bench_config, "Benchmark config JSON")->required();
    bench->add_option("--out", bench_out, "Output directory (overrides the config)");
    bench->add_flag("--deterministic", deterministic, "Write timings as 0 for reproducible reports");

    // report
    auto* report = app.add_subcommand("report", "Render a report CSV as a table");
    std::string report_in;
    report->add_option("--input", report_in, "report.csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (!seed_given) seed = default_seed();

        if (*train) {
            if (train_mode == "noise" && o_train_sigma->count() == 0) throw Failure{1, "--mode noise requires --sigma"};
            const std::vector<size_t> hidden_widths = parse_widths(hidden);
            DatasetPtr data = load_data(train_data, 0);
            const size_t n = certkit_dataset_size(data.get());
            if (n == 0) throw Failure{2, "training set is empty"};
            int max_label = 0;
            for (size_t i = 0; i < n; ++i) {
                const double* x = nullptr;
                int y = 0;
                check(certkit_dataset_sample(data.get(), i, &x, &y));
                max_label = std::max(max_label, y);
            }
            const size_t num_classes = classes > 0 ? classes : static_cast<size_t>(max_label) + 1;
            if (num_classes < 2) throw Failure{1, "need at least two classes"};
            std::vector<size_t> widths{certkit_dataset_dim(data.get())};
            widths.insert(widths.end(), hidden_widths.begin(), hidden_widths.end());
            widths.push_back(num_classes);
            certkit_network* init = nullptr;
            check(certkit_network_create_random(widths.data(), widths.size(), seed, &init));
            NetworkPtr init_ptr(init);
            topt.mode = train_mode.c_str();
            topt.seed = seed;
            topt.noise = noise_kind.c_str();
            topt.noise_scale = sigma;
            certkit_network* trained = nullptr;
            double loss = 0.0;
            check(certkit_train(init, data.get(), &topt, &trained, &loss));
            NetworkPtr trained_ptr(trained);
            check(certkit_network_save(trained, train_out.c_str()));
            std::printf("model=%s mode=%s epochs=%zu final_loss=%s\n", train_out.c_str(), train_mode.c_str(),
                        topt.epochs, num(loss).c_str());
            return 0;
        }

        if (*verify) {
            const certkit_norm norm = parse_norm_flag(norm_text);
            certkit_verifier* raw = nullptr;
            check(certkit_verifier_create(verifier_name.c_str(), &raw));
            VerifierPtr verifier(raw);
            bool has_seed_option = false;
            std::vector<std::string> settings;
            for (const auto& [key, value] : named_options) {
                if (!value.empty()) settings.push_back(key + "=" + value);
            }
            settings.insert(settings.end(), options.begin(), options.end());
            for (const std::string& kv : settings) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw Failure{1, "--option expects key=value, got '" + kv + "'"};
                const std::string key = kv.substr(0, eq);
                has_seed_option = has_seed_option || key == "seed";
                check(certkit_verifier_set(verifier.get(), key.c_str(), kv.substr(eq + 1).c_str()));
            }
            if (verifier_name == "smooth" && !has_seed_option) {
                check(certkit_verifier_set(verifier.get(), "seed", std::to_string(seed).c_str()));
            }
            NetworkPtr net = load_model(vc.model);
            DatasetPtr data = load_data(vc.data, certkit_network_num_classes(net.get()));
            check_fits(net.get(), data.get());
            const size_t n = sample_limit(data.get(), vc.limit);
            std::vector<int> verdicts(n);
            const auto lines = run_ordered(n, vc.jobs, [&](size_t i) {
                const double* x = nullptr;
                int y = 0;
                check(certkit_dataset_sample(data.get(), i, &x, &y));
                const size_t dim = certkit_network_input_dim(net.get());
                certkit_problem problem{x, dim, y, eps, norm, clip ? 1 : 0, timeout};
                certkit_verify_result r{};
                check(certkit_verify(verifier.get(), net.get(), &problem, &r, nullptr));
                verdicts[i] = r.verdict;
                std::string line = "index=" + std::to_string(i) + " label=" + std::to_string(y) +
                                   " predicted=" + std::to_string(r.predicted) +
                                   " verdict=" + certkit_verdict_name(r.verdict);
                if (std::isfinite(r.margin)) line += " margin=" + num(r.margin);
                if (r.has_radius) line += " verifier_radius=" + num(r.radius);
                line += " branches=" + std::to_string(r.branches);
                if (radius) {
                    double rad = 0.0;
                    check(certkit_certified_radius(verifier.get(), net.get(), x, dim, y, norm, precision,
                                                   2.0 * timeout, &rad));
                    line += " certified_radius=" + num(rad);
                }
                if (timing) line += " time_s=" + num(r.wall_time_s);
                return line;
            });
            std::map<int, size_t> counts;
            for (const std::string& line : lines) std::printf("%s\n", line.c_str());
            for (int v : verdicts) ++counts[v];
            const double acc = n == 0 ? 0.0 : static_cast<double>(counts[CERTKIT_ROBUST]) / static_cast<double>(n);
            std::printf("summary verifier=%s eps=%s norm=%s samples=%zu robust=%zu not_robust=%zu unknown=%zu "
                        "timeout=%zu abstain=%zu certified_accuracy=%s\n",
                        verifier_name.c_str(), num(eps).c_str(), norm_text.c_str(), n, counts[CERTKIT_ROBUST],
                        counts[CERTKIT_NOT_ROBUST], counts[CERTKIT_UNKNOWN], counts[CERTKIT_TIMEOUT],
                        counts[CERTKIT_ABSTAIN], num(acc).c_str());
            return 0;
        }

        if (*cert) {
            const certkit_norm norm = parse_norm_flag(cert_norm);
            if (o_lambda->count() > 0) {
                sopt.noise = "laplace";
                sopt.scale = cert_lambda;
            } else if (o_half->count() > 0) {
                sopt.noise = "uniform";
                sopt.scale = cert_half;
            } else if (o_sigma->count() > 0) {
                sopt.scale = cert_sigma;
            }
            sopt.jobs = std::max<size_t>(cc.jobs, 1);
            NetworkPtr net = load_model(cc.model);
            DatasetPtr data = load_data(cc.data, certkit_network_num_classes(net.get()));
            check_fits(net.get(), data.get());
            const size_t n = sample_limit(data.get(), cc.limit);
            size_t robust = 0, abstain = 0;
            for (size_t i = 0; i < n; ++i) {
                const double* x = nullptr;
                int y = 0;
                check(certkit_dataset_sample(data.get(), i, &x, &y));
                certkit_smooth_options local = sopt;
                local.seed = seed + i;
                certkit_smooth_certificate c{};
                check(certkit_smooth_certify(net.get(), x, certkit_network_input_dim(net.get()), &local, &c));
                const double r = norm == CERTKIT_NORM_L2 ? c.radius_l2
                                 : norm == CERTKIT_NORM_L1 ? c.radius_l1
                                                           : c.radius_linf;
                const char* verdict = c.abstain                             ? "abstain"
                                      : (c.predicted == y && r > cert_eps) ? "robust"
                                                                            : "unknown";
                robust += std::string(verdict) == "robust" ? 1 : 0;
                abstain += c.abstain ? 1 : 0;
                std::printf("index=%zu label=%d predicted=%s verdict=%s pa_lower=%s radius_l2=%s radius_l1=%s "
                            "radius_linf=%s\n",
                            i, y, c.abstain ? "abstain" : std::to_string(c.predicted).c_str(), verdict,
                            num(c.pa_lower).c_str(), num(c.radius_l2).c_str(), num(c.radius_l1).c_str(),
                            num(c.radius_linf).c_str());
            }
            std::printf("summary samples=%zu robust=%zu abstain=%zu certified_accuracy=%s\n", n, robust, abstain,
                        num(n == 0 ? 0.0 : static_cast<double>(robust) / static_cast<double>(n)).c_str());
            return 0;
        }

        if (*attack) {
            aopt.norm = parse_norm_flag(attack_norm);
            aopt.clip = attack_clip ? 1 : 0;
            NetworkPtr net = load_model(ac.model);
            DatasetPtr data = load_data(ac.data, certkit_network_num_classes(net.get()));
            check_fits(net.get(), data.get());
            const size_t n = sample_limit(data.get(), ac.limit);
            std::vector<int> found_flags(n);
            std::vector<int> correct(n);
            const auto lines = run_ordered(n, ac.jobs, [&](size_t i) {
                const double* x = nullptr;
                int y = 0;
                check(certkit_dataset_sample(data.get(), i, &x, &y));
                const size_t dim = certkit_network_input_dim(net.get());
                int predicted = 0;
                check(certkit_network_predict(net.get(), x, dim, &predicted));
                certkit_attack_options local = aopt;
                local.seed = seed + i;
                int found = 0;
                std::vector<double> adv(dim);
                check(certkit_attack_pgd(net.get(), x, dim, y, attack_eps, &local, &found, adv.data()));
                found_flags[i] = found;
                correct[i] = predicted == y ? 1 : 0;
                std::string line = "index=" + std::to_string(i) + " label=" + std::to_string(y) +
                                   " predicted=" + std::to_string(predicted) + " found=" + std::to_string(found);
                if (found) {
                    int adv_label = 0;
                    check(certkit_network_predict(net.get(), adv.data(), dim, &adv_label));
                    line += " adversarial_label=" + std::to_string(adv_label);
                }
                return line;
            });
            size_t robust = 0, clean = 0;
            for (size_t i = 0; i < n; ++i) {
                std::printf("%s\n", lines[i].c_str());
                clean += correct[i];
                robust += correct[i] && !found_flags[i] ? 1 : 0;
            }
            const double denom = n == 0 ? 1.0 : static_cast<double>(n);
            std::printf("summary samples=%zu clean_accuracy=%s pgd_accuracy=%s\n", n,
                        num(static_cast<double>(clean) / denom).c_str(),
                        num(static_cast<double>(robust) / denom).c_str());
            return 0;
        }

        if (*bench) {
            char* table = nullptr;
            check(certkit_bench_run_config(bench_config.c_str(), bench_out.empty() ? nullptr : bench_out.c_str(),
                                           deterministic ? 1 : 0, &table));
            std::fputs(table, stdout);
            certkit_string_free(table);
            return 0;
        }

        if (*report) {
            char* table = nullptr;
            check(certkit_report_render(report_in.c_str(), &table));
            std::fputs(table, stdout);
            certkit_string_free(table);
            return 0;
        }
    } catch (const Failure& f) {
        std::fprintf(stderr, "error: %s\n", f.message.c_str());
        return f.code;
    }
    return 0;
}
