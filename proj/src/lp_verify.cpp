// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/lp_verify.hpp"

#include "certkit/linear.hpp"

#include <vector>

namespace certkit {

namespace {

struct RowBuilder {
    std::vector<Vector> rows;
    std::vector<double> rhs;
    Eigen::Index width;

    void add(Vector row, double b) {
        rows.push_back(std::move(row));
        rhs.push_back(b);
    }
};

Phase phase_of(const PhaseAssignment& splits, std::size_t layer, std::size_t neuron) {
    if (layer >= splits.size() || neuron >= splits[layer].size()) return Phase::Unfixed;
    return splits[layer][neuron];
}

} // namespace

RelaxedNetworkLp encode_relaxed_lp(const Network& net, const VerificationProblem& problem,
                                   const std::vector<LayerBounds>& preactivation, const PhaseAssignment& splits,
                                   const Vector& logit_objective) {
    if (problem.norm != Norm::Linf) {
        throw Error(ErrorKind::InvalidArgument, "the LP relaxation supports Linf regions only");
    }
    if (preactivation.size() != net.num_hidden_layers()) {
        throw Error(ErrorKind::DimensionMismatch, "expected one bound per hidden layer");
    }
    const auto n = static_cast<Eigen::Index>(net.input_dim());
    std::vector<Eigen::Index> offsets{0};
    Eigen::Index total = n;
    for (std::size_t k = 0; k < net.num_hidden_layers(); ++k) {
        offsets.push_back(total);
        total += static_cast<Eigen::Index>(net.hidden_width(k));
    }

    RelaxedNetworkLp out;
    out.input_dim = net.input_dim();
    out.lp.lower = Vector::Constant(total, -kInfinity);
    out.lp.upper = Vector::Constant(total, kInfinity);
    out.lp.lower.head(n) = problem.box_lower();
    out.lp.upper.head(n) = problem.box_upper();

    RowBuilder rows{{}, {}, total};
    for (std::size_t k = 0; k < net.num_hidden_layers(); ++k) {
        const AffineLayer& layer = net.affine(k);
        const Eigen::Index in_offset = offsets[k];
        const Eigen::Index out_offset = offsets[k + 1];
        const auto in_width = static_cast<Eigen::Index>(layer.in_dim());
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(layer.out_dim()); ++j) {
            const Eigen::Index z = out_offset + j;
            const double l = preactivation[k].lower[j];
            const double u = preactivation[k].upper[j];
            const double b = layer.bias[j];
            // zhat = w . prev + b, encoded as (w, -b) rows.
            Vector w = Vector::Zero(total);
            w.segment(in_offset, in_width) = layer.weights.row(j).transpose();

            out.lp.lower[z] = 0.0;
            const Phase phase = phase_of(splits, k, static_cast<std::size_t>(j));
            if (phase == Phase::Inactive || (phase == Phase::Unfixed && u <= 0.0)) {
                out.lp.upper[z] = 0.0;
                if (phase == Phase::Inactive) rows.add(w, -b); // zhat <= 0
                continue;
            }
            if (phase == Phase::Active || l >= 0.0) {
                if (phase == Phase::Active) rows.add(-w, b); // zhat >= 0
                Vector eq = -w;
                eq[z] = 1.0;
                rows.add(eq, b);     // z - w.prev <= b
                rows.add(-eq, -b);   // w.prev - z <= -b
                continue;
            }
            // Unstable: z >= 0, z >= zhat, z <= s (zhat - l).
            Vector above = w;
            above[z] = -1.0;
            rows.add(above, -b);
            const double slope = u / (u - l);
            Vector below = -slope * w;
            below[z] = 1.0;
            rows.add(below, slope * (b - l));
        }
    }

    const std::size_t m = rows.rows.size();
    out.lp.a = Matrix::Zero(static_cast<Eigen::Index>(m), total);
    out.lp.b = Vector(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
        out.lp.a.row(static_cast<Eigen::Index>(i)) = rows.rows[i].transpose();
        out.lp.b[static_cast<Eigen::Index>(i)] = rows.rhs[i];
    }

    const AffineLayer& last = net.affine(net.depth() - 1);
    const Vector projected = last.weights.transpose() * logit_objective;
    out.lp.objective = Vector::Zero(total);
    out.lp.objective.segment(offsets.back(), projected.size()) = projected;
    out.objective_offset = logit_objective.dot(last.bias);
    return out;
}

RelaxedLpSolution solve_relaxed_lp(const Network& net, const VerificationProblem& problem,
                                   const std::vector<LayerBounds>& preactivation, const PhaseAssignment& splits,
                                   const Vector& logit_objective, const SimplexOptions& options) {
    const RelaxedNetworkLp encoded = encode_relaxed_lp(net, problem, preactivation, splits, logit_objective);
    const LpResult lp = simplex_solve(encoded.lp, options);
    RelaxedLpSolution out;
    out.status = lp.status;
    if (lp.status == LpStatus::Optimal) {
        out.value = lp.value + encoded.objective_offset;
        out.input = lp.x.head(static_cast<Eigen::Index>(encoded.input_dim));
    }
    return out;
}

VerificationResult lp_full_verify(const VerificationProblem& problem, const Network& net,
                                  const std::vector<LayerBounds>& preactivation, const SimplexOptions& options) {
    problem.validate(net.input_dim(), net.num_classes());
    if (problem.norm != Norm::Linf) {
        throw Error(ErrorKind::InvalidArgument, "lpfull supports the linf norm only");
    }
    const auto classes = static_cast<Eigen::Index>(net.num_classes());
    VerificationResult result;
    result.margins = Vector::Constant(classes, kInfinity);
    for (Eigen::Index y = 0; y < classes; ++y) {
        if (y == problem.y0) continue;
        Vector objective = Vector::Zero(classes);
        objective[problem.y0] = 1.0;
        objective[y] = -1.0;
        try {
            const RelaxedLpSolution solution =
                solve_relaxed_lp(net, problem, preactivation, PhaseAssignment{}, objective, options);
            if (solution.status != LpStatus::Optimal) {
                result.margins[y] = -kInfinity;
                result.diagnostic = "LP for class " + std::to_string(y) + " not optimal";
                continue;
            }
            result.margins[y] = solution.value;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::SolverStalled) throw;
            result.margins[y] = -kInfinity;
            result.diagnostic = e.what();
        }
    }
    result.verdict = verdict_from_margins(result.margins, problem.y0);
    return result;
}

VerificationResult lp_full_verify(const VerificationProblem& problem, const Network& net) {
    return lp_full_verify(problem, net, preactivation_bounds(problem, net, BoundSource::Polyhedra));
}

} // namespace certkit
