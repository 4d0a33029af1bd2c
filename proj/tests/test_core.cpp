// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/io.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>

using namespace certkit;
using namespace certkit::testing;

namespace {

Network tiny_relu_net() {
    Matrix w1(2, 1);
    w1 << 1, -1;
    Matrix w2 = Matrix::Identity(2, 2);
    return Network(std::vector<Layer>{AffineLayer{w1, Vector::Zero(2)}, ReluLayer{}, AffineLayer{w2, Vector::Zero(2)}});
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

template <typename Fn>
ErrorKind error_kind_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Internal;
}

} // namespace

TEST_CASE("forward on hand-written networks") {
    Matrix w(1, 1);
    w << 2;
    Vector b(1);
    b << 1;
    const Network affine_only(std::vector<AffineLayer>{{w, b}});
    CHECK(forward(affine_only, Vector::Constant(1, 3.0))[0] == 7.0);

    const Vector out = forward(tiny_relu_net(), Vector::Constant(1, -2.0));
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 2.0);
}

TEST_CASE("forward matches a straight-line evaluator") {
    std::mt19937_64 rng(11);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Network net = random_net({5, 7, 6, 3}, seed);
        const Vector x = random_vector(rng, 5);
        const Vector ours = forward(net, x);
        const auto theirs = naive_forward(net, std::vector<double>(x.data(), x.data() + x.size()));
        for (Eigen::Index i = 0; i < ours.size(); ++i) CHECK(ours[i] == doctest::Approx(theirs[i]).epsilon(1e-12));
        CHECK(forward(net, x) == ours); // pure and deterministic
    }
}

TEST_CASE("forward rejects dimension mismatch") {
    const Network net = random_net({3, 4, 2}, 1);
    CHECK(error_kind_of([&] { forward(net, Vector::Zero(4)); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("network structure validation") {
    const AffineLayer a{Matrix::Ones(2, 3), Vector::Zero(2)};
    const AffineLayer bad{Matrix::Ones(2, 4), Vector::Zero(2)};
    CHECK(error_kind_of([&] { Network(std::vector<Layer>{a, ReluLayer{}, bad}); }) == ErrorKind::MalformedDimensions);
    CHECK(error_kind_of([&] { Network(std::vector<Layer>{a, ReluLayer{}}); }) == ErrorKind::MalformedDimensions);
    CHECK(error_kind_of([&] { Network(std::vector<Layer>{ReluLayer{}, a}); }) == ErrorKind::MalformedDimensions);
    CHECK(error_kind_of([&] { Network(std::vector<Layer>{a, a}); }) == ErrorKind::MalformedDimensions);
}

TEST_CASE("argmax breaks ties towards the lowest index") {
    Vector v(4);
    v << 1, 3, 3, 2;
    CHECK(argmax(v) == 1);
    CHECK(argmax(Vector::Zero(3)) == 0);
}

TEST_CASE("backward_input simple cases") {
    Matrix w(1, 1);
    w << -0.75;
    const Network linear(std::vector<AffineLayer>{{w, Vector::Zero(1)}});
    CHECK(backward_input(linear, Vector::Constant(1, 0.3), Vector::Ones(1))[0] == -0.75);

    // The only hidden neuron is negative: gradient vanishes.
    Matrix w1(1, 1);
    w1 << 1.0;
    Vector b1(1);
    b1 << -5.0;
    const Network dead(std::vector<AffineLayer>{{w1, b1}, {Matrix::Ones(2, 1), Vector::Zero(2)}});
    CHECK(backward_input(dead, Vector::Constant(1, 0.5), Vector::Ones(2))[0] == 0.0);
}

TEST_CASE("backward_input matches central differences") {
    std::mt19937_64 rng(5);
    int checked = 0;
    for (std::uint64_t seed = 0; checked < 30; ++seed) {
        const Network net = random_net({4, 6, 5, 3}, seed);
        const Vector x = random_vector(rng, 4);
        // Skip points close to a ReLU kink.
        const auto trace = forward_trace(net, x);
        bool near_kink = false;
        for (std::size_t k = 0; k + 1 < trace.size(); ++k) near_kink |= trace[k].cwiseAbs().minCoeff() < 1e-3;
        if (near_kink) continue;
        const Vector g = random_vector(rng, 3, -1.0, 1.0);
        const Vector grad = backward_input(net, x, g);
        const double h = 1e-5;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            Vector xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd = (g.dot(forward(net, xp)) - g.dot(forward(net, xm))) / (2 * h);
            CHECK(std::abs(fd - grad[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
        }
        ++checked;
    }
}

TEST_CASE("cross entropy and its gradient") {
    Vector logits(3);
    logits << 1.0, 2.0, 0.5;
    Vector grad;
    const double loss = cross_entropy(logits, 1, &grad);
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(0.5);
    CHECK(loss == doctest::Approx(-std::log(std::exp(2.0) / z)).epsilon(1e-14));
    CHECK(grad.sum() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(grad[1] == doctest::Approx(std::exp(2.0) / z - 1.0));
    // Large logits stay finite.
    logits << 1000.0, -1000.0, 0.0;
    CHECK(std::isfinite(cross_entropy(logits, 1)));
}

TEST_CASE("model round trip is bit-exact") {
    const auto dir = scratch_dir("model_io");
    const Network net = random_net({6, 8, 8, 4}, 3);
    const std::string path = (dir / "m.json").string();
    save_network(net, path);
    const Network back = load_network(path);
    REQUIRE(back.depth() == net.depth());
    for (std::size_t k = 0; k < net.depth(); ++k) {
        CHECK(back.affine(k).weights == net.affine(k).weights);
        CHECK(back.affine(k).bias == net.affine(k).bias);
    }
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const Vector x = random_vector(rng, 6);
        CHECK(forward(back, x) == forward(net, x));
    }
}

TEST_CASE("model loading errors have distinct kinds") {
    const auto dir = scratch_dir("model_errors");
    CHECK(error_kind_of([&] { load_network((dir / "absent.json").string()); }) == ErrorKind::MissingFile);

    write_text(dir / "rows.json",
               R"({"version":1,"input_dim":2,"num_classes":2,"layers":[{"type":"affine","weights":[[1,2],[3]],"bias":[0,0]}]})");
    CHECK(error_kind_of([&] { load_network((dir / "rows.json").string()); }) == ErrorKind::MalformedDimensions);

    write_text(dir / "bias.json",
               R"({"version":1,"input_dim":2,"num_classes":2,"layers":[{"type":"affine","weights":[[1,2],[3,4]],"bias":[0]}]})");
    CHECK(error_kind_of([&] { load_network((dir / "bias.json").string()); }) == ErrorKind::MalformedDimensions);

    write_text(dir / "v999.json",
               R"({"version":999,"input_dim":1,"num_classes":1,"layers":[{"type":"affine","weights":[[1]],"bias":[0]}]})");
    CHECK(error_kind_of([&] { load_network((dir / "v999.json").string()); }) == ErrorKind::UnsupportedVersion);

    write_text(dir / "junk.json", "{not json");
    CHECK(error_kind_of([&] { load_network((dir / "junk.json").string()); }) == ErrorKind::Format);
}

TEST_CASE("dataset loading") {
    const auto dir = scratch_dir("dataset");
    write_text(dir / "ok.csv", "label,f0,f1\n1,0.25,0.5\n0,1,0\n");
    const auto data = load_dataset((dir / "ok.csv").string(), 2);
    REQUIRE(data.size() == 2);
    CHECK(data[0].y == 1);
    CHECK(data[0].x[0] == 0.25);
    CHECK(data[0].x[1] == 0.5);
    CHECK(data[1].x[0] == 1.0);

    write_text(dir / "feature.csv", "label,f0,f1\n0,0.5,0.5\n1,1.5,0\n");
    try {
        load_dataset((dir / "feature.csv").string(), 2);
        FAIL("expected range error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Range);
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }

    write_text(dir / "label.csv", "label,f0\n2,0.5\n");
    CHECK(error_kind_of([&] { load_dataset((dir / "label.csv").string(), 2); }) == ErrorKind::Range);

    const std::string out = (dir / "copy.csv").string();
    save_dataset(data, out);
    const auto again = load_dataset(out, 2);
    CHECK(again[0].x == data[0].x);
    CHECK(again[1].y == data[1].y);
}

TEST_CASE("perturbation regions") {
    VerificationProblem p{Vector::Constant(3, 0.5), 0, 0.1, Norm::Linf, false};
    CHECK(p.contains(Vector::Constant(3, 0.6)));
    CHECK_FALSE(p.contains(Vector::Constant(3, 0.61)));
    CHECK(p.project(Vector::Constant(3, 2.0)) == Vector::Constant(3, 0.6));

    p.norm = Norm::L2;
    const Vector far = Vector::Constant(3, 1.5);
    const Vector projected = p.project(far);
    CHECK((projected - p.x0).norm() == doctest::Approx(0.1));
    CHECK(p.contains(projected));

    p.norm = Norm::L1;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        const Vector x = random_vector(rng, 3, -1.0, 2.0);
        const Vector q = p.project(x);
        CHECK((q - p.x0).lpNorm<1>() <= 0.1 + 1e-12);
        // Projection is the closest point: random feasible points are never closer.
        const Vector other = p.project(random_vector(rng, 3, -1.0, 2.0));
        CHECK((x - q).norm() <= (x - other).norm() + 1e-12);
    }

    VerificationProblem clipped{Vector::Constant(2, 0.95), 0, 0.1, Norm::Linf, true};
    CHECK(clipped.box_upper() == Vector::Ones(2));
    CHECK(clipped.box_lower() == Vector::Constant(2, 0.85));
}

TEST_CASE("dual norms") {
    Vector a(3);
    a << 1, -2, 2;
    CHECK(dual_norm(a, Norm::Linf) == 5.0);
    CHECK(dual_norm(a, Norm::L2) == 3.0);
    CHECK(dual_norm(a, Norm::L1) == 2.0);
    CHECK(parse_norm("l2") == Norm::L2);
    CHECK_THROWS_AS(parse_norm("l3"), Error);
}
