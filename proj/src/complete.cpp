// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/complete.hpp"

#include "certkit/attack.hpp"
#include "certkit/lp_verify.hpp"

#include <string>
#include <utility>

namespace certkit {

BabBounding parse_bab_bounding(std::string_view text) {
    if (text == "interval" || text == "ibp") return BabBounding::Interval;
    if (text == "crown" || text == "polyhedra") return BabBounding::Polyhedra;
    if (text == "lpfull" || text == "lp") return BabBounding::LpFull;
    throw Error(ErrorKind::InvalidArgument, "unknown bounding method '" + std::string(text) + "'");
}

namespace {

struct NeuronRef {
    std::size_t layer = 0;
    std::size_t neuron = 0;
};

std::optional<NeuronRef> choose_branch_neuron(const std::vector<LayerBounds>& bounds, const PhaseAssignment& splits,
                                              BranchRule rule) {
    std::optional<NeuronRef> best;
    double best_gap = -1.0;
    for (std::size_t k = 0; k < bounds.size(); ++k) {
        for (std::size_t j = 0; j < bounds[k].size(); ++j) {
            if (splits[k][j] != Phase::Unfixed) continue;
            const auto i = static_cast<Eigen::Index>(j);
            const double l = bounds[k].lower[i];
            const double u = bounds[k].upper[i];
            if (!(l < 0.0 && u > 0.0)) continue;
            if (rule == BranchRule::FirstUnstable) return NeuronRef{k, j};
            if (u - l > best_gap) {
                best_gap = u - l;
                best = NeuronRef{k, j};
            }
        }
    }
    return best;
}

// Vertex of the region minimising the linear lower bound; a cheap starting
// point for the counterexample search.
Vector linear_minimizer(const Vector& coeffs, const VerificationProblem& problem) {
    const Vector lo = problem.box_lower();
    const Vector hi = problem.box_upper();
    Vector x = problem.x0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (coeffs[i] > 0.0) x[i] = lo[i];
        else if (coeffs[i] < 0.0) x[i] = hi[i];
    }
    return x;
}

struct BranchBound {
    bool infeasible = false;
    bool stalled = false;
    double lower = -kInfinity;
    std::optional<Vector> candidate;
};

BranchBound bound_branch(const Network& net, const VerificationProblem& problem, const BabConfig& config,
                         const std::vector<LayerBounds>& bounds, const PhaseAssignment& splits, int target,
                         bool leaf) {
    const auto classes = static_cast<Eigen::Index>(net.num_classes());
    Vector objective = Vector::Zero(classes);
    objective[problem.y0] = 1.0;
    objective[target] = -1.0;

    BranchBound out;
    if (config.bounding == BabBounding::LpFull || leaf) {
        try {
            const RelaxedLpSolution lp = solve_relaxed_lp(net, problem, bounds, splits, objective);
            if (lp.status == LpStatus::Infeasible) {
                out.infeasible = true;
                return out;
            }
            if (lp.status == LpStatus::Optimal) {
                out.lower = lp.value;
                out.candidate = lp.input;
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::SolverStalled) throw;
            out.stalled = true;
        }
        return out;
    }

    const LinearForm form =
        backsubstitute_lower(net, net.depth() - 1, objective.transpose(), Vector::Zero(1), bounds, config.relax);
    out.candidate = linear_minimizer(form.coeffs.row(0).transpose(), problem);
    if (config.bounding == BabBounding::Interval) {
        out.lower = ibp_margins(net, problem, bounds)[target];
    } else {
        out.lower = std::max(concretize_lower(form, problem)[0], ibp_margins(net, problem, bounds)[target]);
    }
    return out;
}

} // namespace

CompleteVerdict bab_verify(const VerificationProblem& problem, const Network& net, const BabConfig& config,
                           const Deadline& deadline) {
    const Stopwatch clock;
    problem.validate(net.input_dim(), net.num_classes());
    if (problem.norm != Norm::Linf) throw Error(ErrorKind::InvalidArgument, "bab supports the linf norm only");
    const Deadline budget = deadline.capped(config.timeout_s);
    const BoundSource source =
        config.bounding == BabBounding::Interval ? BoundSource::Interval : BoundSource::Polyhedra;
    const double search_step = problem.eps / 8.0;

    CompleteVerdict verdict;
    const auto classes = static_cast<Eigen::Index>(net.num_classes());
    verdict.margins = Vector::Constant(classes, kInfinity);
    auto finish = [&](CompleteOutcome outcome) {
        verdict.outcome = outcome;
        verdict.wall_time_s = clock.seconds();
        return verdict;
    };
    auto found = [&](const Vector& x, int target) {
        verdict.counterexample = x;
        const Vector logits = forward(net, x);
        verdict.margins[target] = logits[problem.y0] - logits[target];
        return finish(CompleteOutcome::NotRobust);
    };

    if (predict(net, problem.x0) != problem.y0) {
        const int other = predict(net, problem.x0);
        return found(problem.x0, other);
    }

    bool indeterminate = false;
    for (Eigen::Index y = 0; y < classes; ++y) {
        if (y == problem.y0) continue;
        const int target = static_cast<int>(y);
        std::vector<PhaseAssignment> stack{net.unfixed_phases()};
        while (!stack.empty()) {
            if (budget.expired()) {
                verdict.margins[y] = -kInfinity;
                return finish(CompleteOutcome::Timeout);
            }
            PhaseAssignment splits = std::move(stack.back());
            stack.pop_back();
            ++verdict.branches_explored;

            const auto bounds = preactivation_bounds(problem, net, source, config.relax, splits);
            if (!bounds) continue; // empty sub-region
            const auto neuron = choose_branch_neuron(*bounds, splits, config.branch_rule);
            const bool leaf = !neuron.has_value();
            const BranchBound bound = bound_branch(net, problem, config, *bounds, splits, target, leaf);
            if (bound.infeasible) continue;
            if (bound.lower > kSoundnessMargin) {
                verdict.margins[y] = std::min(verdict.margins[y], bound.lower);
                continue;
            }

            // Upper bounding: concrete evaluation, then a short targeted PGD.
            const Vector start = bound.candidate ? problem.project(*bound.candidate) : problem.x0;
            if (predict(net, start) != problem.y0 && problem.contains(start)) return found(start, target);
            if (auto adv = pgd_margin_search(net, problem, target, start, config.pgd_steps, search_step)) {
                return found(*adv, target);
            }

            if (leaf) {
                // Exact region value is within the soundness band (or the LP
                // stalled): neither verified nor refuted.
                indeterminate = true;
                verdict.margins[y] = std::min(verdict.margins[y], bound.lower);
                continue;
            }
            PhaseAssignment active = splits;
            active[neuron->layer][neuron->neuron] = Phase::Active;
            splits[neuron->layer][neuron->neuron] = Phase::Inactive;
            stack.push_back(std::move(active));
            stack.push_back(std::move(splits)); // inactive branch explored first
        }
    }
    return finish(indeterminate ? CompleteOutcome::Indeterminate : CompleteOutcome::Robust);
}

VerificationResult to_verification_result(const CompleteVerdict& verdict) {
    VerificationResult result;
    result.margins = verdict.margins;
    result.branches = verdict.branches_explored;
    result.counterexample = verdict.counterexample;
    switch (verdict.outcome) {
    case CompleteOutcome::Robust: result.verdict = Verdict::Robust; break;
    case CompleteOutcome::NotRobust: result.verdict = Verdict::NotRobust; break;
    case CompleteOutcome::Timeout: result.verdict = Verdict::Timeout; break;
    case CompleteOutcome::Indeterminate:
        result.verdict = Verdict::Unknown;
        result.diagnostic = "exact margin within the soundness band";
        break;
    }
    return result;
}

namespace {

// Depth-first enumeration of activation patterns, pruning patterns whose
// region inside the box is empty.
class PatternSearch {
public:
    PatternSearch(const VerificationProblem& problem, const Network& net, const IntervalBounds& ibp,
                  ExactMargins& out)
        : problem_(problem), net_(net), ibp_(ibp), out_(out), lo_(problem.box_lower()), hi_(problem.box_upper()) {}

    void run() {
        const AffineLayer& first = net_.affine(0);
        if (net_.num_hidden_layers() == 0) {
            finish(first.weights, first.bias);
            return;
        }
        const auto width = static_cast<Eigen::Index>(first.out_dim());
        descend(0, first.weights, first.bias, Matrix::Zero(width, lo_.size()), Vector::Zero(width), 0);
    }

private:
    LpResult solve(const Vector& objective) const {
        LinearProgram lp;
        const auto n = lo_.size();
        lp.objective = objective;
        lp.lower = lo_;
        lp.upper = hi_;
        lp.a = Matrix(static_cast<Eigen::Index>(rows_.size()), n);
        lp.b = Vector(static_cast<Eigen::Index>(rows_.size()));
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            lp.a.row(static_cast<Eigen::Index>(i)) = rows_[i].transpose();
            lp.b[static_cast<Eigen::Index>(i)] = rhs_[i];
        }
        return simplex_solve(lp);
    }

    bool feasible() const { return solve(Vector::Zero(lo_.size())).status == LpStatus::Optimal; }

    // pre = pre_coeffs * x + pre_offset for hidden layer k; post rows are
    // filled neuron by neuron.
    void descend(std::size_t k, const Matrix& pre_coeffs, const Vector& pre_offset, Matrix post_coeffs,
                 Vector post_offset, std::size_t j) {
        if (j == net_.hidden_width(k)) {
            const AffineLayer& next = net_.affine(k + 1);
            const Matrix coeffs = next.weights * post_coeffs;
            const Vector offset = next.weights * post_offset + next.bias;
            if (k + 1 == net_.num_hidden_layers()) {
                finish(coeffs, offset);
            } else {
                const auto width = static_cast<Eigen::Index>(next.out_dim());
                descend(k + 1, coeffs, offset, Matrix::Zero(width, lo_.size()), Vector::Zero(width), 0);
            }
            return;
        }
        const auto i = static_cast<Eigen::Index>(j);
        const double l = ibp_.preactivation[k].lower[i];
        const double u = ibp_.preactivation[k].upper[i];
        const Vector row = pre_coeffs.row(i).transpose();

        if (u > 0.0) { // active phase possible
            const bool constrained = l < 0.0;
            if (constrained) push(-row, pre_offset[i]); // zhat >= 0
            if (!constrained || feasible()) {
                Matrix coeffs = post_coeffs;
                Vector offset = post_offset;
                coeffs.row(i) = row.transpose();
                offset[i] = pre_offset[i];
                descend(k, pre_coeffs, pre_offset, std::move(coeffs), std::move(offset), j + 1);
            }
            if (constrained) pop();
        }
        if (l < 0.0 || u <= 0.0) { // inactive phase possible
            const bool constrained = u > 0.0;
            if (constrained) push(row, -pre_offset[i]); // zhat <= 0
            if (!constrained || feasible()) descend(k, pre_coeffs, pre_offset, post_coeffs, post_offset, j + 1);
            if (constrained) pop();
        }
    }

    void finish(const Matrix& logit_coeffs, const Vector& logit_offset) {
        ++out_.regions;
        const int y0 = problem_.y0;
        for (Eigen::Index y = 0; y < logit_coeffs.rows(); ++y) {
            if (y == y0) continue;
            const Vector c = (logit_coeffs.row(y0) - logit_coeffs.row(y)).transpose();
            const LpResult lp = solve(c);
            if (lp.status != LpStatus::Optimal) continue;
            const double value = lp.value + logit_offset[y0] - logit_offset[y];
            if (value < out_.margins[y]) {
                out_.margins[y] = value;
                out_.minimizers[static_cast<std::size_t>(y)] = lp.x;
            }
        }
    }

    void push(Vector row, double b) {
        rows_.push_back(std::move(row));
        rhs_.push_back(b);
    }
    void pop() {
        rows_.pop_back();
        rhs_.pop_back();
    }

    const VerificationProblem& problem_;
    const Network& net_;
    const IntervalBounds& ibp_;
    ExactMargins& out_;
    Vector lo_;
    Vector hi_;
    std::vector<Vector> rows_;
    std::vector<double> rhs_;
};

} // namespace

ExactMargins brute_force_margin(const VerificationProblem& problem, const Network& net, std::size_t max_unstable) {
    problem.validate(net.input_dim(), net.num_classes());
    if (problem.norm != Norm::Linf) {
        throw Error(ErrorKind::InvalidArgument, "brute-force margins support the linf norm only");
    }
    const IntervalBounds ibp = ibp_propagate(net, problem.box_lower(), problem.box_upper());
    std::size_t unstable = 0;
    for (const auto& layer : ibp.preactivation) {
        for (Eigen::Index j = 0; j < layer.lower.size(); ++j) {
            if (layer.lower[j] < 0.0 && layer.upper[j] > 0.0) ++unstable;
        }
    }
    if (unstable > max_unstable) {
        throw Error(ErrorKind::InvalidArgument, "brute force refuses " + std::to_string(unstable) +
                                                    " unstable neurons (limit " + std::to_string(max_unstable) +
                                                    ")");
    }
    ExactMargins out;
    out.margins = Vector::Constant(static_cast<Eigen::Index>(net.num_classes()), kInfinity);
    out.minimizers.resize(net.num_classes());
    PatternSearch(problem, net, ibp, out).run();
    return out;
}

} // namespace certkit
