// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace certkit {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::MissingFile: return "missing file";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::MalformedDimensions: return "malformed dimensions";
    case ErrorKind::UnsupportedVersion: return "unsupported version";
    case ErrorKind::Range: return "out of range";
    case ErrorKind::SolverStalled: return "solver stalled";
    case ErrorKind::Internal: return "internal error";
    }
    return "unknown error";
}

std::string_view to_string(Norm norm) {
    switch (norm) {
    case Norm::Linf: return "linf";
    case Norm::L2: return "l2";
    case Norm::L1: return "l1";
    }
    return "?";
}

Norm parse_norm(std::string_view text) {
    if (text == "linf" || text == "inf") return Norm::Linf;
    if (text == "l2" || text == "2") return Norm::L2;
    if (text == "l1" || text == "1") return Norm::L1;
    throw Error(ErrorKind::InvalidArgument, "unknown norm '" + std::string(text) + "'");
}

double dual_norm(const Vector& a, Norm norm) {
    switch (norm) {
    case Norm::Linf: return a.lpNorm<1>();
    case Norm::L2: return a.norm();
    case Norm::L1: return a.size() == 0 ? 0.0 : a.lpNorm<Eigen::Infinity>();
    }
    return 0.0;
}

double norm_of(const Vector& v, Norm norm) {
    switch (norm) {
    case Norm::Linf: return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
    case Norm::L2: return v.norm();
    case Norm::L1: return v.lpNorm<1>();
    }
    return 0.0;
}

std::string_view to_string(Verdict verdict) {
    switch (verdict) {
    case Verdict::Robust: return "robust";
    case Verdict::NotRobust: return "not_robust";
    case Verdict::Unknown: return "unknown";
    case Verdict::Timeout: return "timeout";
    case Verdict::Abstain: return "abstain";
    }
    return "unknown";
}

void VerificationProblem::validate(std::size_t input_dim, std::size_t num_classes) const {
    if (static_cast<std::size_t>(x0.size()) != input_dim) {
        throw Error(ErrorKind::DimensionMismatch,
                    "input has dimension " + std::to_string(x0.size()) + ", network expects " +
                        std::to_string(input_dim));
    }
    if (y0 < 0 || static_cast<std::size_t>(y0) >= num_classes) {
        throw Error(ErrorKind::Range, "label " + std::to_string(y0) + " outside [0, " +
                                          std::to_string(num_classes) + ")");
    }
    if (!(eps >= 0.0) || !std::isfinite(eps)) {
        throw Error(ErrorKind::InvalidArgument, "eps must be finite and non-negative");
    }
}

Vector VerificationProblem::box_lower() const {
    Vector lo = x0.array() - eps;
    if (clip && norm == Norm::Linf) lo = lo.cwiseMax(0.0);
    return lo;
}

Vector VerificationProblem::box_upper() const {
    Vector hi = x0.array() + eps;
    if (clip && norm == Norm::Linf) hi = hi.cwiseMin(1.0);
    return hi;
}

namespace {

// Euclidean projection of v onto {w : |w|_1 <= radius}.
Vector project_l1_ball(const Vector& v, double radius) {
    if (v.lpNorm<1>() <= radius) return v;
    std::vector<double> mags(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(v[i]);
    std::sort(mags.begin(), mags.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t i = 0; i < mags.size(); ++i) {
        cumulative += mags[i];
        const double candidate = (cumulative - radius) / static_cast<double>(i + 1);
        if (mags[i] - candidate > 0.0) theta = candidate;
    }
    Vector out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double m = std::max(std::abs(v[i]) - theta, 0.0);
        out[i] = v[i] < 0.0 ? -m : m;
    }
    return out;
}

} // namespace

Vector VerificationProblem::project(const Vector& x) const {
    Vector delta = x - x0;
    switch (norm) {
    case Norm::Linf:
        return x.cwiseMax(box_lower()).cwiseMin(box_upper());
    case Norm::L2: {
        const double n = delta.norm();
        if (n > eps) delta *= eps / n;
        return x0 + delta;
    }
    case Norm::L1:
        return x0 + project_l1_ball(delta, eps);
    }
    return x;
}

bool VerificationProblem::contains(const Vector& x, double tol) const {
    if (x.size() != x0.size()) return false;
    if (norm_of(x - x0, norm) > eps + tol) return false;
    if (clip && norm == Norm::Linf) {
        if (x.minCoeff() < -tol || x.maxCoeff() > 1.0 + tol) return false;
    }
    return true;
}

double VerificationResult::min_margin() const {
    if (margins.size() == 0) return -kInfinity;
    return margins.minCoeff();
}

Verdict verdict_from_margins(const Vector& margins, int y0) {
    for (Eigen::Index y = 0; y < margins.size(); ++y) {
        if (y == y0) continue;
        if (!(margins[y] > kSoundnessMargin)) return Verdict::Unknown;
    }
    return Verdict::Robust;
}

} // namespace certkit
