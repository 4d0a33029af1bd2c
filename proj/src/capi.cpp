// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/certkit.h"

#include "certkit/attack.hpp"
#include "certkit/bench.hpp"
#include "certkit/io.hpp"
#include "certkit/training.hpp"
#include "certkit/verifier.hpp"

#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

struct certkit_network {
    certkit::Network net;
};

struct certkit_dataset {
    std::vector<certkit::LabeledSample> samples;
};

struct certkit_verifier {
    certkit::VerifierConfig config;
};

namespace {

thread_local std::string last_error;

certkit_status status_of(certkit::ErrorKind kind) {
    using certkit::ErrorKind;
    switch (kind) {
    case ErrorKind::InvalidArgument: return CERTKIT_ERR_INVALID_ARGUMENT;
    case ErrorKind::DimensionMismatch: return CERTKIT_ERR_DIMENSION;
    case ErrorKind::MissingFile: return CERTKIT_ERR_MISSING_FILE;
    case ErrorKind::Io: return CERTKIT_ERR_IO;
    case ErrorKind::Format: return CERTKIT_ERR_FORMAT;
    case ErrorKind::MalformedDimensions: return CERTKIT_ERR_MALFORMED_DIMENSIONS;
    case ErrorKind::UnsupportedVersion: return CERTKIT_ERR_UNSUPPORTED_VERSION;
    case ErrorKind::Range: return CERTKIT_ERR_RANGE;
    case ErrorKind::SolverStalled: return CERTKIT_ERR_SOLVER_STALLED;
    case ErrorKind::Internal: return CERTKIT_ERR_INTERNAL;
    }
    return CERTKIT_ERR_INTERNAL;
}

certkit_status fail(certkit_status status, std::string message) {
    last_error = std::move(message);
    return status;
}

template <typename Fn>
certkit_status guarded(Fn&& fn) {
    try {
        last_error.clear();
        fn();
        return CERTKIT_OK;
    } catch (const certkit::Error& e) {
        return fail(status_of(e.kind()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(CERTKIT_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(CERTKIT_ERR_INTERNAL, e.what());
    }
}

void require(bool condition, const char* message) {
    if (!condition) throw certkit::Error(certkit::ErrorKind::InvalidArgument, message);
}

certkit::Norm to_norm(certkit_norm norm) {
    switch (norm) {
    case CERTKIT_NORM_LINF: return certkit::Norm::Linf;
    case CERTKIT_NORM_L2: return certkit::Norm::L2;
    case CERTKIT_NORM_L1: return certkit::Norm::L1;
    }
    throw certkit::Error(certkit::ErrorKind::InvalidArgument, "unknown norm");
}

certkit_verdict to_c(certkit::Verdict verdict) {
    switch (verdict) {
    case certkit::Verdict::Robust: return CERTKIT_ROBUST;
    case certkit::Verdict::NotRobust: return CERTKIT_NOT_ROBUST;
    case certkit::Verdict::Unknown: return CERTKIT_UNKNOWN;
    case certkit::Verdict::Timeout: return CERTKIT_TIMEOUT;
    case certkit::Verdict::Abstain: return CERTKIT_ABSTAIN;
    }
    return CERTKIT_UNKNOWN;
}

certkit::Vector input_vector(const certkit_network* net, const double* x, size_t dim) {
    require(net != nullptr && x != nullptr, "null argument");
    if (dim != net->net.input_dim()) {
        throw certkit::Error(certkit::ErrorKind::DimensionMismatch,
                             "input has " + std::to_string(dim) + " features, network expects " +
                                 std::to_string(net->net.input_dim()));
    }
    return Eigen::Map<const certkit::Vector>(x, static_cast<Eigen::Index>(dim));
}

char* duplicate(const std::string& text) {
    char* out = new char[text.size() + 1];
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

} // namespace

extern "C" {

const char* certkit_version(void) { return "0.1.0"; }

const char* certkit_last_error(void) { return last_error.c_str(); }

const char* certkit_status_name(certkit_status status) {
    switch (status) {
    case CERTKIT_OK: return "ok";
    case CERTKIT_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case CERTKIT_ERR_DIMENSION: return "dimension_mismatch";
    case CERTKIT_ERR_MISSING_FILE: return "missing_file";
    case CERTKIT_ERR_IO: return "io";
    case CERTKIT_ERR_FORMAT: return "format";
    case CERTKIT_ERR_MALFORMED_DIMENSIONS: return "malformed_dimensions";
    case CERTKIT_ERR_UNSUPPORTED_VERSION: return "unsupported_version";
    case CERTKIT_ERR_RANGE: return "range";
    case CERTKIT_ERR_SOLVER_STALLED: return "solver_stalled";
    case CERTKIT_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* certkit_verdict_name(certkit_verdict verdict) {
    switch (verdict) {
    case CERTKIT_ROBUST: return "robust";
    case CERTKIT_NOT_ROBUST: return "not_robust";
    case CERTKIT_UNKNOWN: return "unknown";
    case CERTKIT_TIMEOUT: return "timeout";
    case CERTKIT_ABSTAIN: return "abstain";
    }
    return "unknown";
}

certkit_status certkit_norm_parse(const char* text, certkit_norm* out) {
    return guarded([&] {
        require(text != nullptr && out != nullptr, "null argument");
        switch (certkit::parse_norm(text)) {
        case certkit::Norm::Linf: *out = CERTKIT_NORM_LINF; break;
        case certkit::Norm::L2: *out = CERTKIT_NORM_L2; break;
        case certkit::Norm::L1: *out = CERTKIT_NORM_L1; break;
        }
    });
}

void certkit_string_free(char* text) { delete[] text; }

certkit_status certkit_network_load(const char* path, certkit_network** out) {
    return guarded([&] {
        require(path != nullptr && out != nullptr, "null argument");
        *out = new certkit_network{certkit::load_network(path)};
    });
}

certkit_status certkit_network_save(const certkit_network* net, const char* path) {
    return guarded([&] {
        require(net != nullptr && path != nullptr, "null argument");
        certkit::save_network(net->net, path);
    });
}

certkit_status certkit_network_create_random(const size_t* widths, size_t count, uint64_t seed,
                                             certkit_network** out) {
    return guarded([&] {
        require(widths != nullptr && out != nullptr, "null argument");
        require(count >= 2, "need at least input and output widths");
        for (size_t i = 0; i < count; ++i) require(widths[i] > 0, "widths must be positive");
        *out = new certkit_network{certkit::make_random_network(std::span<const size_t>(widths, count), seed)};
    });
}

void certkit_network_free(certkit_network* net) { delete net; }

size_t certkit_network_input_dim(const certkit_network* net) { return net ? net->net.input_dim() : 0; }

size_t certkit_network_num_classes(const certkit_network* net) { return net ? net->net.num_classes() : 0; }

certkit_status certkit_network_forward(const certkit_network* net, const double* x, size_t dim, double* logits,
                                       size_t num_classes) {
    return guarded([&] {
        const certkit::Vector input = input_vector(net, x, dim);
        require(logits != nullptr, "null argument");
        if (num_classes != net->net.num_classes()) {
            throw certkit::Error(certkit::ErrorKind::DimensionMismatch, "logit buffer size mismatch");
        }
        const certkit::Vector out = certkit::forward(net->net, input);
        std::copy(out.data(), out.data() + out.size(), logits);
    });
}

certkit_status certkit_network_predict(const certkit_network* net, const double* x, size_t dim, int* label) {
    return guarded([&] {
        const certkit::Vector input = input_vector(net, x, dim);
        require(label != nullptr, "null argument");
        *label = certkit::predict(net->net, input);
    });
}

certkit_status certkit_dataset_load(const char* path, size_t num_classes, certkit_dataset** out) {
    return guarded([&] {
        require(path != nullptr && out != nullptr, "null argument");
        std::optional<std::size_t> classes;
        if (num_classes > 0) classes = num_classes;
        *out = new certkit_dataset{certkit::load_dataset(path, classes)};
    });
}

void certkit_dataset_free(certkit_dataset* data) { delete data; }

size_t certkit_dataset_size(const certkit_dataset* data) { return data ? data->samples.size() : 0; }

size_t certkit_dataset_dim(const certkit_dataset* data) {
    return data && !data->samples.empty() ? static_cast<size_t>(data->samples.front().x.size()) : 0;
}

certkit_status certkit_dataset_sample(const certkit_dataset* data, size_t index, const double** features,
                                      int* label) {
    return guarded([&] {
        require(data != nullptr && features != nullptr && label != nullptr, "null argument");
        if (index >= data->samples.size()) throw certkit::Error(certkit::ErrorKind::Range, "sample index out of range");
        *features = data->samples[index].x.data();
        *label = data->samples[index].y;
    });
}

certkit_status certkit_verifier_create(const char* kind, certkit_verifier** out) {
    return guarded([&] {
        require(kind != nullptr && out != nullptr, "null argument");
        *out = new certkit_verifier{certkit::make_verifier_config(kind)};
    });
}

certkit_status certkit_verifier_set(certkit_verifier* verifier, const char* key, const char* value) {
    return guarded([&] {
        require(verifier != nullptr && key != nullptr && value != nullptr, "null argument");
        verifier->config.set(key, value);
    });
}

void certkit_verifier_free(certkit_verifier* verifier) { delete verifier; }

certkit_status certkit_verify(const certkit_verifier* verifier, const certkit_network* net,
                              const certkit_problem* problem, certkit_verify_result* result,
                              double* counterexample) {
    return guarded([&] {
        require(verifier != nullptr && problem != nullptr && result != nullptr, "null argument");
        certkit::VerificationProblem p{input_vector(net, problem->x0, problem->dim), problem->label, problem->eps,
                                       to_norm(problem->norm), problem->clip != 0};
        const certkit::Deadline deadline =
            problem->timeout_s > 0.0 ? certkit::Deadline::after(problem->timeout_s) : certkit::Deadline::never();
        const certkit::Stopwatch clock;
        const certkit::VerificationResult r = certkit::run_verifier(verifier->config, net->net, p, deadline);
        *result = certkit_verify_result{};
        result->verdict = to_c(r.verdict);
        result->predicted = certkit::predict(net->net, p.x0);
        result->margin = r.margins.size() > 0 ? r.min_margin() : 0.0;
        result->has_radius = r.radius.has_value() ? 1 : 0;
        result->radius = r.radius.value_or(0.0);
        result->branches = r.branches;
        result->wall_time_s = clock.seconds();
        result->has_counterexample = r.counterexample.has_value() ? 1 : 0;
        if (counterexample != nullptr && r.counterexample) {
            std::copy(r.counterexample->data(), r.counterexample->data() + r.counterexample->size(), counterexample);
        }
    });
}

certkit_status certkit_certified_radius(const certkit_verifier* verifier, const certkit_network* net,
                                        const double* x0, size_t dim, int label, certkit_norm norm,
                                        double precision, double timeout_s, double* radius) {
    return guarded([&] {
        require(verifier != nullptr && radius != nullptr, "null argument");
        require(precision > 0.0, "precision must be positive");
        const certkit::LabeledSample sample{input_vector(net, x0, dim), label};
        *radius = certkit::certified_radius(certkit::make_verifier(verifier->config), net->net, sample,
                                            to_norm(norm), precision, timeout_s > 0.0 ? timeout_s : 1e18);
    });
}

void certkit_attack_options_default(certkit_attack_options* options) {
    if (options == nullptr) return;
    const certkit::AttackConfig defaults;
    *options = certkit_attack_options{defaults.steps, 0.0, defaults.restarts, defaults.random_start ? 1 : 0,
                                      CERTKIT_NORM_LINF, defaults.seed, 0};
}

certkit_status certkit_attack_pgd(const certkit_network* net, const double* x0, size_t dim, int label, double eps,
                                  const certkit_attack_options* options, int* found, double* adversarial) {
    return guarded([&] {
        const certkit::Vector x = input_vector(net, x0, dim);
        require(options != nullptr && found != nullptr, "null argument");
        certkit::AttackConfig config;
        config.steps = options->steps;
        if (options->step_size > 0.0) config.step_size = options->step_size;
        config.restarts = options->restarts;
        config.random_start = options->random_start != 0;
        config.norm = to_norm(options->norm);
        config.seed = options->seed;
        config.clip = options->clip != 0;
        const certkit::AttackResult r = certkit::pgd(net->net, x, label, eps, config);
        *found = r.found ? 1 : 0;
        if (r.found && adversarial != nullptr) {
            std::copy(r.adversarial.data(), r.adversarial.data() + r.adversarial.size(), adversarial);
        }
    });
}

void certkit_smooth_options_default(certkit_smooth_options* options) {
    if (options == nullptr) return;
    const certkit::SmoothConfig defaults;
    *options = certkit_smooth_options{"gaussian", 0.25, defaults.n0, defaults.n, defaults.alpha, defaults.seed, 1};
}

certkit_status certkit_smooth_certify(const certkit_network* net, const double* x0, size_t dim,
                                      const certkit_smooth_options* options,
                                      certkit_smooth_certificate* certificate) {
    return guarded([&] {
        const certkit::Vector x = input_vector(net, x0, dim);
        require(options != nullptr && certificate != nullptr, "null argument");
        certkit::SmoothingDistribution dist{certkit::parse_noise_kind(options->noise ? options->noise : "gaussian"),
                                            options->scale};
        dist.validate();
        const certkit::SmoothConfig config{options->n0, options->n, options->alpha, options->seed, options->jobs};
        const certkit::SmoothCertificate cert = certkit::certify(net->net, x, dist, config);
        *certificate = certkit_smooth_certificate{cert.predicted ? 0 : 1, cert.predicted.value_or(-1),
                                                  cert.pa_lower, cert.radius_l2, cert.radius_l1, cert.radius_linf};
    });
}

void certkit_train_options_default(certkit_train_options* options) {
    if (options == nullptr) return;
    const certkit::TrainConfig d;
    *options = certkit_train_options{"standard",  d.epochs, d.batch_size, d.learning_rate, d.seed, d.eps_target,
                                     d.warmup_fraction, d.kappa, "gaussian", 0.0};
}

certkit_status certkit_train(const certkit_network* init, const certkit_dataset* data,
                             const certkit_train_options* options, certkit_network** out, double* final_loss) {
    return guarded([&] {
        require(init != nullptr && data != nullptr && options != nullptr && out != nullptr, "null argument");
        const certkit::TrainMode mode = certkit::parse_train_mode(options->mode ? options->mode : "standard");
        certkit::TrainConfig config;
        config.epochs = options->epochs;
        config.batch_size = options->batch_size;
        config.learning_rate = options->learning_rate;
        config.seed = options->seed;
        config.eps_target = options->eps;
        config.warmup_fraction = options->warmup_fraction;
        config.kappa = options->kappa;
        if (mode == certkit::TrainMode::Noise) {
            config.noise = certkit::SmoothingDistribution{
                certkit::parse_noise_kind(options->noise ? options->noise : "gaussian"), options->noise_scale};
        }
        certkit::TrainResult result = certkit::train(init->net, data->samples, mode, config);
        if (final_loss != nullptr) *final_loss = result.epoch_loss.back();
        *out = new certkit_network{std::move(result.network)};
    });
}

certkit_status certkit_bench_run_config(const char* config_path, const char* output_dir, int deterministic,
                                        char** table) {
    return guarded([&] {
        require(config_path != nullptr, "null argument");
        certkit::BenchmarkConfig config = certkit::load_benchmark_config(config_path);
        if (output_dir != nullptr) config.output_dir = output_dir;
        const std::string text = certkit::run_benchmark_files(config, deterministic != 0);
        if (table != nullptr) *table = duplicate(text);
    });
}

certkit_status certkit_report_render(const char* csv_path, char** table) {
    return guarded([&] {
        require(csv_path != nullptr && table != nullptr, "null argument");
        std::ifstream in(csv_path, std::ios::binary);
        if (!in) throw certkit::Error(certkit::ErrorKind::MissingFile, std::string("cannot open '") + csv_path + "'");
        std::ostringstream text;
        text << in.rdbuf();
        *table = duplicate(certkit::report_table(certkit::parse_report_csv(text.str())));
    });
}

} // extern "C"
