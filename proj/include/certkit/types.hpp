// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace certkit {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Slack subtracted from every certified margin before a Robust verdict is
// issued. Guards against rounding in the bound computations.
inline constexpr double kSoundnessMargin = 1e-6;

enum class ErrorKind {
    InvalidArgument,
    DimensionMismatch,
    MissingFile,
    Io,
    Format,
    MalformedDimensions,
    UnsupportedVersion,
    Range,
    SolverStalled,
    Internal,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

enum class Norm { Linf, L2, L1 };

std::string_view to_string(Norm norm);
Norm parse_norm(std::string_view text);

/// Hölder dual of the perturbation norm: the norm applied to a linear
/// functional when it is minimized over the ball.
double dual_norm(const Vector& a, Norm norm);

/// Norm of a vector measured in `norm`.
double norm_of(const Vector& v, Norm norm);

enum class Verdict { Robust, NotRobust, Unknown, Timeout, Abstain };

std::string_view to_string(Verdict verdict);

/// Phase assignment of one hidden neuron inside a branch.
enum class Phase : std::int8_t { Unfixed, Active, Inactive };

/// Per-hidden-layer phase assignment. An empty outer vector means "no splits".
using PhaseAssignment = std::vector<std::vector<Phase>>;

/// Robustness query: is `y0` the prediction everywhere in the closed
/// `norm`-ball of radius `eps` around `x0`?
struct VerificationProblem {
    Vector x0;
    int y0 = 0;
    double eps = 0.0;
    Norm norm = Norm::Linf;
    // Intersect the ball with [0,1]^n. Only honoured for Linf.
    bool clip = false;

    void validate(std::size_t input_dim, std::size_t num_classes) const;

    /// Smallest box containing the perturbation region.
    Vector box_lower() const;
    Vector box_upper() const;

    /// Euclidean projection of `x` onto the perturbation region.
    Vector project(const Vector& x) const;

    bool contains(const Vector& x, double tol = 1e-9) const;
};

/// Outcome shared by all verifiers. `margins[y]` is a certified lower bound on
/// f(x)_{y0} - f(x)_y over the region; `margins[y0]` is +inf.
struct VerificationResult {
    Verdict verdict = Verdict::Unknown;
    Vector margins;
    std::optional<double> radius;
    std::optional<Vector> counterexample;
    std::size_t branches = 0;
    std::string diagnostic;

    double min_margin() const;
};

/// Fills verdict from margins: Robust iff every competitor margin exceeds the
/// soundness margin.
Verdict verdict_from_margins(const Vector& margins, int y0);

} // namespace certkit
