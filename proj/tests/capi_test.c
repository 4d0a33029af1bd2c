/* Copyright (c) certkit contributors.
 * SPDX-License-Identifier: Apache-2.0 */
#include "certkit/certkit.h"

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                                              \
    do {                                                                          \
        if (!(cond)) {                                                            \
            fprintf(stderr, "%s:%d: expectation failed: %s\n", __FILE__, __LINE__, #cond); \
            ++failures;                                                           \
        }                                                                         \
    } while (0)

static void write_text(const char* path, const char* text) {
    FILE* f = fopen(path, "w");
    if (!f) {
        perror(path);
        exit(2);
    }
    fputs(text, f);
    fclose(f);
}

static void test_errors(void) {
    certkit_network* net = NULL;
    EXPECT(certkit_network_load("/nonexistent/model.json", &net) == CERTKIT_ERR_MISSING_FILE);
    EXPECT(net == NULL);
    EXPECT(strlen(certkit_last_error()) > 0);
    EXPECT(strcmp(certkit_status_name(CERTKIT_ERR_RANGE), "range") == 0);
    EXPECT(strcmp(certkit_verdict_name(CERTKIT_NOT_ROBUST), "not_robust") == 0);

    certkit_norm norm;
    EXPECT(certkit_norm_parse("l2", &norm) == CERTKIT_OK && norm == CERTKIT_NORM_L2);
    EXPECT(certkit_norm_parse("l3", &norm) == CERTKIT_ERR_INVALID_ARGUMENT);

    certkit_verifier* v = NULL;
    EXPECT(certkit_verifier_create("oracle", &v) == CERTKIT_ERR_INVALID_ARGUMENT);
    EXPECT(certkit_verifier_create("crown", &v) == CERTKIT_OK);
    EXPECT(certkit_verifier_set(v, "relax", "zero") == CERTKIT_OK);
    EXPECT(certkit_verifier_set(v, "colour", "red") == CERTKIT_ERR_INVALID_ARGUMENT);
    certkit_verifier_free(v);

    const size_t widths[] = {3};
    EXPECT(certkit_network_create_random(widths, 1, 0, &net) == CERTKIT_ERR_INVALID_ARGUMENT);
    EXPECT(certkit_network_create_random(NULL, 0, 0, &net) != CERTKIT_OK);
    certkit_network_free(NULL);
    certkit_dataset_free(NULL);
    certkit_verifier_free(NULL);
    certkit_string_free(NULL);
}

static void test_network_and_verify(void) {
    const size_t widths[] = {2, 6, 3};
    certkit_network* net = NULL;
    EXPECT(certkit_network_create_random(widths, 3, 7, &net) == CERTKIT_OK);
    EXPECT(certkit_network_input_dim(net) == 2);
    EXPECT(certkit_network_num_classes(net) == 3);

    const double x0[2] = {0.3, 0.6};
    double logits[3];
    EXPECT(certkit_network_forward(net, x0, 2, logits, 3) == CERTKIT_OK);
    EXPECT(certkit_network_forward(net, x0, 3, logits, 3) == CERTKIT_ERR_DIMENSION);
    int label = -1;
    EXPECT(certkit_network_predict(net, x0, 2, &label) == CERTKIT_OK);
    EXPECT(label >= 0 && label < 3);
    for (int c = 0; c < 3; ++c) EXPECT(logits[c] <= logits[label]);

    const char* path = "capi_test_model.json";
    EXPECT(certkit_network_save(net, path) == CERTKIT_OK);
    certkit_network* loaded = NULL;
    EXPECT(certkit_network_load(path, &loaded) == CERTKIT_OK);
    double again[3];
    EXPECT(certkit_network_forward(loaded, x0, 2, again, 3) == CERTKIT_OK);
    for (int c = 0; c < 3; ++c) EXPECT(again[c] == logits[c]);
    certkit_network_free(loaded);

    /* A complete verifier never proves more than an incomplete one refutes. */
    certkit_verifier* ibp = NULL;
    certkit_verifier* bab = NULL;
    EXPECT(certkit_verifier_create("ibp", &ibp) == CERTKIT_OK);
    EXPECT(certkit_verifier_create("bab", &bab) == CERTKIT_OK);
    certkit_problem p = {x0, 2, label, 0.05, CERTKIT_NORM_LINF, 0, 10.0};
    certkit_verify_result r_ibp, r_bab;
    double cex[2];
    EXPECT(certkit_verify(ibp, net, &p, &r_ibp, NULL) == CERTKIT_OK);
    EXPECT(certkit_verify(bab, net, &p, &r_bab, cex) == CERTKIT_OK);
    EXPECT(r_bab.verdict == CERTKIT_ROBUST || r_bab.verdict == CERTKIT_NOT_ROBUST);
    if (r_ibp.verdict == CERTKIT_ROBUST) EXPECT(r_bab.verdict == CERTKIT_ROBUST);
    if (r_bab.has_counterexample) {
        int adv = -1;
        EXPECT(fabs(cex[0] - x0[0]) <= p.eps + 1e-12 && fabs(cex[1] - x0[1]) <= p.eps + 1e-12);
        EXPECT(certkit_network_predict(net, cex, 2, &adv) == CERTKIT_OK && adv != label);
    }
    p.eps = -1.0;
    EXPECT(certkit_verify(ibp, net, &p, &r_ibp, NULL) == CERTKIT_ERR_INVALID_ARGUMENT);

    double radius = -1.0;
    EXPECT(certkit_certified_radius(ibp, net, x0, 2, label, CERTKIT_NORM_LINF, 1e-3, 10.0, &radius) == CERTKIT_OK);
    EXPECT(radius >= 0.0 && radius <= 0.5);
    p.eps = radius;
    if (radius > 0.0) {
        EXPECT(certkit_verify(ibp, net, &p, &r_ibp, NULL) == CERTKIT_OK);
        EXPECT(r_ibp.verdict == CERTKIT_ROBUST);
    }

    certkit_attack_options ao;
    certkit_attack_options_default(&ao);
    EXPECT(ao.steps == 100 && ao.restarts == 1);
    int found = 0;
    double adv[2];
    EXPECT(certkit_attack_pgd(net, x0, 2, label, 0.5, &ao, &found, adv) == CERTKIT_OK);
    if (found) {
        int y = -1;
        EXPECT(certkit_network_predict(net, adv, 2, &y) == CERTKIT_OK && y != label);
    }

    certkit_smooth_options so;
    certkit_smooth_options_default(&so);
    so.noise = "gaussian";
    so.scale = 0.25;
    so.n0 = 100;
    so.n = 2000;
    certkit_smooth_certificate c1, c2;
    EXPECT(certkit_smooth_certify(net, x0, 2, &so, &c1) == CERTKIT_OK);
    so.jobs = 3;
    EXPECT(certkit_smooth_certify(net, x0, 2, &so, &c2) == CERTKIT_OK);
    EXPECT(c1.abstain == c2.abstain && c1.predicted == c2.predicted && c1.pa_lower == c2.pa_lower);
    so.noise = "cauchy";
    EXPECT(certkit_smooth_certify(net, x0, 2, &so, &c1) == CERTKIT_ERR_INVALID_ARGUMENT);

    certkit_verifier_free(ibp);
    certkit_verifier_free(bab);
    certkit_network_free(net);
    remove(path);
}

static void test_dataset_and_training(void) {
    write_text("capi_test_data.csv", "label,f0,f1\n0,0.1,0.2\n1,0.9,0.8\n0,0.2,0.1\n1,0.8,0.9\n");
    write_text("capi_test_bad.csv", "label,f0,f1\n0,0.1\n");
    certkit_dataset* data = NULL;
    EXPECT(certkit_dataset_load("capi_test_bad.csv", 2, &data) == CERTKIT_ERR_MALFORMED_DIMENSIONS);
    EXPECT(certkit_dataset_load("capi_test_data.csv", 2, &data) == CERTKIT_OK);
    EXPECT(certkit_dataset_size(data) == 4 && certkit_dataset_dim(data) == 2);
    const double* x = NULL;
    int y = -1;
    EXPECT(certkit_dataset_sample(data, 1, &x, &y) == CERTKIT_OK && y == 1 && x[0] == 0.9);
    EXPECT(certkit_dataset_sample(data, 4, &x, &y) == CERTKIT_ERR_RANGE);

    const size_t widths[] = {2, 8, 2};
    certkit_network* init = NULL;
    EXPECT(certkit_network_create_random(widths, 3, 1, &init) == CERTKIT_OK);
    certkit_train_options to;
    certkit_train_options_default(&to);
    to.epochs = 200;
    certkit_network* a = NULL;
    certkit_network* b = NULL;
    double loss_a = 0.0, loss_b = 0.0;
    EXPECT(certkit_train(init, data, &to, &a, &loss_a) == CERTKIT_OK);
    EXPECT(certkit_train(init, data, &to, &b, &loss_b) == CERTKIT_OK);
    EXPECT(loss_a == loss_b);
    for (size_t i = 0; i < 4; ++i) {
        int pred = -1;
        certkit_dataset_sample(data, i, &x, &y);
        EXPECT(certkit_network_predict(a, x, 2, &pred) == CERTKIT_OK && pred == y);
    }
    /* ibp at eps 0 trains exactly like standard */
    to.mode = "ibp";
    to.eps = 0.0;
    EXPECT(certkit_train(init, data, &to, &b, &loss_b) == CERTKIT_OK);
    EXPECT(loss_b == loss_a);
    certkit_network_free(b);
    b = NULL;
    to.mode = "dropout";
    EXPECT(certkit_train(init, data, &to, &b, NULL) == CERTKIT_ERR_INVALID_ARGUMENT);
    certkit_network_free(a);
    certkit_network_free(b);
    certkit_network_free(init);
    certkit_dataset_free(data);
    remove("capi_test_data.csv");
    remove("capi_test_bad.csv");
}

int main(void) {
    EXPECT(strlen(certkit_version()) > 0);
    test_errors();
    test_network_and_verify();
    test_dataset_and_training();
    if (failures) {
        fprintf(stderr, "%d expectation(s) failed\n", failures);
        return 1;
    }
    puts("capi: all expectations met");
    return 0;
}
