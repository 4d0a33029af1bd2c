// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/attack.hpp"

#include "certkit/random.hpp"

#include <cmath>
#include <random>

namespace certkit {

namespace {

Vector random_point(const VerificationProblem& region, std::mt19937_64& rng) {
    const auto n = region.x0.size();
    if (region.norm == Norm::Linf) {
        const Vector lo = region.box_lower();
        const Vector hi = region.box_upper();
        Vector x(n);
        for (Eigen::Index i = 0; i < n; ++i) x[i] = std::uniform_real_distribution<double>(lo[i], hi[i])(rng);
        return x;
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector dir(n);
    for (Eigen::Index i = 0; i < n; ++i) dir[i] = gauss(rng);
    const double length = dir.norm();
    if (length == 0.0) return region.x0;
    const double scale =
        region.eps * std::pow(std::uniform_real_distribution<double>(0.0, 1.0)(rng), 1.0 / static_cast<double>(n));
    return region.project(region.x0 + dir * (scale / length));
}

Vector ascent_direction(const Vector& grad, Norm norm) {
    if (norm == Norm::Linf) return grad.unaryExpr([](double g) { return g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0); });
    const double length = grad.norm();
    return length > 0.0 ? Vector(grad / length) : Vector(Vector::Zero(grad.size()));
}

} // namespace

AttackResult pgd(const Network& net, const Vector& x0, int y0, double eps, const AttackConfig& config) {
    VerificationProblem region{x0, y0, eps, config.norm, config.clip};
    region.validate(net.input_dim(), net.num_classes());
    if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "pgd requires eps > 0");
    if (config.norm == Norm::L1) throw Error(ErrorKind::InvalidArgument, "pgd supports linf and l2 only");
    if (config.steps == 0) throw Error(ErrorKind::InvalidArgument, "pgd requires at least one step");
    const double step = config.step_size.value_or(eps / 50.0);
    if (!(step > 0.0)) throw Error(ErrorKind::InvalidArgument, "pgd step size must be positive");

    AttackResult result;
    for (std::size_t restart = 0; restart < std::max<std::size_t>(config.restarts, 1); ++restart) {
        std::mt19937_64 rng(derive_seed(config.seed, {restart}));
        Vector x = config.random_start ? random_point(region, rng) : region.project(x0);
        for (std::size_t it = 0; it <= config.steps; ++it) {
            if (it > 0) {
                Vector grad_logits;
                cross_entropy(forward(net, x), y0, &grad_logits);
                const Vector grad = backward_input(net, x, grad_logits);
                x = region.project(x + step * ascent_direction(grad, config.norm));
            }
            if (predict(net, x) != y0 && region.contains(x)) {
                result.found = true;
                result.adversarial = x;
                result.restart = restart;
                result.step = it;
                return result;
            }
        }
    }
    return result;
}

std::optional<Vector> pgd_margin_search(const Network& net, const VerificationProblem& problem, int target,
                                        const Vector& start, std::size_t steps, double step_size) {
    const auto classes = static_cast<Eigen::Index>(net.num_classes());
    Vector direction = Vector::Zero(classes);
    direction[target] += 1.0;
    direction[problem.y0] -= 1.0;
    const Norm norm = problem.norm == Norm::L1 ? Norm::L2 : problem.norm;
    Vector x = problem.project(start);
    for (std::size_t it = 0; it <= steps; ++it) {
        if (it > 0) {
            const Vector grad = backward_input(net, x, direction);
            x = problem.project(x + step_size * ascent_direction(grad, norm));
        }
        if (predict(net, x) != problem.y0 && problem.contains(x)) return x;
    }
    return std::nullopt;
}

} // namespace certkit
