/* Copyright (c) certkit contributors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface of the certkit shared library. All handles are opaque; every
 * fallible call returns a certkit_status and leaves a thread-local message
 * readable through certkit_last_error().
 */
#ifndef CERTKIT_CERTKIT_H
#define CERTKIT_CERTKIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CERTKIT_API __declspec(dllexport)
#else
#define CERTKIT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum certkit_status {
    CERTKIT_OK = 0,
    CERTKIT_ERR_INVALID_ARGUMENT = 1,
    CERTKIT_ERR_DIMENSION = 2,
    CERTKIT_ERR_MISSING_FILE = 3,
    CERTKIT_ERR_IO = 4,
    CERTKIT_ERR_FORMAT = 5,
    CERTKIT_ERR_MALFORMED_DIMENSIONS = 6,
    CERTKIT_ERR_UNSUPPORTED_VERSION = 7,
    CERTKIT_ERR_RANGE = 8,
    CERTKIT_ERR_SOLVER_STALLED = 9,
    CERTKIT_ERR_INTERNAL = 10
} certkit_status;

typedef enum certkit_norm { CERTKIT_NORM_LINF = 0, CERTKIT_NORM_L2 = 1, CERTKIT_NORM_L1 = 2 } certkit_norm;

typedef enum certkit_verdict {
    CERTKIT_ROBUST = 0,
    CERTKIT_NOT_ROBUST = 1,
    CERTKIT_UNKNOWN = 2,
    CERTKIT_TIMEOUT = 3,
    CERTKIT_ABSTAIN = 4
} certkit_verdict;

CERTKIT_API const char* certkit_version(void);
CERTKIT_API const char* certkit_last_error(void);
CERTKIT_API const char* certkit_status_name(certkit_status status);
/* "robust", "not_robust", "unknown", "timeout", "abstain". */
CERTKIT_API const char* certkit_verdict_name(certkit_verdict verdict);
CERTKIT_API certkit_status certkit_norm_parse(const char* text, certkit_norm* out);
/* Strings returned through char** out-parameters are released here. */
CERTKIT_API void certkit_string_free(char* text);

/* Networks */
typedef struct certkit_network certkit_network;

CERTKIT_API certkit_status certkit_network_load(const char* path, certkit_network** out);
CERTKIT_API certkit_status certkit_network_save(const certkit_network* net, const char* path);
/* widths = {input_dim, hidden..., num_classes}; count >= 2. */
CERTKIT_API certkit_status certkit_network_create_random(const size_t* widths, size_t count, uint64_t seed,
                                                         certkit_network** out);
CERTKIT_API void certkit_network_free(certkit_network* net);
CERTKIT_API size_t certkit_network_input_dim(const certkit_network* net);
CERTKIT_API size_t certkit_network_num_classes(const certkit_network* net);
CERTKIT_API certkit_status certkit_network_forward(const certkit_network* net, const double* x, size_t dim,
                                                   double* logits, size_t num_classes);
CERTKIT_API certkit_status certkit_network_predict(const certkit_network* net, const double* x, size_t dim,
                                                   int* label);

/* Datasets: CSV with header label,f0,...; num_classes 0 skips the label check. */
typedef struct certkit_dataset certkit_dataset;

CERTKIT_API certkit_status certkit_dataset_load(const char* path, size_t num_classes, certkit_dataset** out);
CERTKIT_API void certkit_dataset_free(certkit_dataset* data);
CERTKIT_API size_t certkit_dataset_size(const certkit_dataset* data);
CERTKIT_API size_t certkit_dataset_dim(const certkit_dataset* data);
/* features stays valid until the dataset is freed. */
CERTKIT_API certkit_status certkit_dataset_sample(const certkit_dataset* data, size_t index,
                                                  const double** features, int* label);

/* Verifiers: kinds ibp, crown, lpfull, bab, lipschitz, smooth. A verifier is
 * read-only during certkit_verify and may be shared across threads. */
typedef struct certkit_verifier certkit_verifier;

CERTKIT_API certkit_status certkit_verifier_create(const char* kind, certkit_verifier** out);
CERTKIT_API certkit_status certkit_verifier_set(certkit_verifier* verifier, const char* key, const char* value);
CERTKIT_API void certkit_verifier_free(certkit_verifier* verifier);

typedef struct certkit_problem {
    const double* x0;
    size_t dim;
    int label;
    double eps;
    certkit_norm norm;
    int clip;         /* intersect the ball with [0,1]^n (linf only) */
    double timeout_s; /* <= 0: no limit */
} certkit_problem;

typedef struct certkit_verify_result {
    certkit_verdict verdict;
    int predicted;     /* predicted class at x0 */
    double margin;     /* smallest certified competitor margin */
    int has_radius;
    double radius;
    size_t branches;
    double wall_time_s;
    int has_counterexample;
} certkit_verify_result;

/* counterexample may be NULL; otherwise it has room for problem->dim values. */
CERTKIT_API certkit_status certkit_verify(const certkit_verifier* verifier, const certkit_network* net,
                                          const certkit_problem* problem, certkit_verify_result* result,
                                          double* counterexample);

/* Largest eps in [0, 0.5] the verifier proves, by bisection to `precision`. */
CERTKIT_API certkit_status certkit_certified_radius(const certkit_verifier* verifier, const certkit_network* net,
                                                    const double* x0, size_t dim, int label, certkit_norm norm,
                                                    double precision, double timeout_s, double* radius);

/* Attack */
typedef struct certkit_attack_options {
    size_t steps;
    double step_size; /* <= 0: eps / 50 */
    size_t restarts;
    int random_start;
    certkit_norm norm;
    uint64_t seed;
    int clip;
} certkit_attack_options;

CERTKIT_API void certkit_attack_options_default(certkit_attack_options* options);
/* adversarial may be NULL; otherwise it has room for dim values. */
CERTKIT_API certkit_status certkit_attack_pgd(const certkit_network* net, const double* x0, size_t dim, int label,
                                              double eps, const certkit_attack_options* options, int* found,
                                              double* adversarial);

/* Randomized smoothing */
typedef struct certkit_smooth_options {
    const char* noise; /* "gaussian", "laplace", "uniform" */
    double scale;
    size_t n0;
    size_t n;
    double alpha;
    uint64_t seed;
    size_t jobs;
} certkit_smooth_options;

typedef struct certkit_smooth_certificate {
    int abstain;
    int predicted;
    double pa_lower;
    double radius_l2;
    double radius_l1;
    double radius_linf;
} certkit_smooth_certificate;

CERTKIT_API void certkit_smooth_options_default(certkit_smooth_options* options);
CERTKIT_API certkit_status certkit_smooth_certify(const certkit_network* net, const double* x0, size_t dim,
                                                  const certkit_smooth_options* options,
                                                  certkit_smooth_certificate* certificate);

/* Training */
typedef struct certkit_train_options {
    const char* mode; /* "standard", "ibp", "noise" */
    size_t epochs;
    size_t batch_size;
    double learning_rate;
    uint64_t seed;
    double eps;
    double warmup_fraction;
    double kappa;
    const char* noise; /* noise mode only */
    double noise_scale;
} certkit_train_options;

CERTKIT_API void certkit_train_options_default(certkit_train_options* options);
/* final_loss may be NULL. */
CERTKIT_API certkit_status certkit_train(const certkit_network* init, const certkit_dataset* data,
                                         const certkit_train_options* options, certkit_network** out,
                                         double* final_loss);

/* Benchmarks. output_dir NULL keeps the config's directory; deterministic
 * writes all timings as 0. table (nullable) receives the text table. */
CERTKIT_API certkit_status certkit_bench_run_config(const char* config_path, const char* output_dir,
                                                    int deterministic, char** table);
CERTKIT_API certkit_status certkit_report_render(const char* csv_path, char** table);

#ifdef __cplusplus
}
#endif

#endif /* CERTKIT_CERTKIT_H */
