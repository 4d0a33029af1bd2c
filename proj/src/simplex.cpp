// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "certkit/simplex.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace certkit {

namespace {

// How an original variable maps onto non-negative standard-form columns.
struct ColumnMap {
    enum Kind { Shift, Reflect, Split } kind = Shift;
    Eigen::Index column = 0; // first standard column
    double anchor = 0.0;     // lo for Shift, hi for Reflect
};

class Tableau {
public:
    Tableau(Eigen::Index rows, Eigen::Index cols) : t_(Matrix::Zero(rows + 1, cols + 1)), basis_(rows, -1) {}

    Eigen::Index rows() const { return t_.rows() - 1; }
    Eigen::Index cols() const { return t_.cols() - 1; }
    double& at(Eigen::Index r, Eigen::Index c) { return t_(r, c); }
    double& rhs(Eigen::Index r) { return t_(r, cols()); }
    double& cost(Eigen::Index c) { return t_(rows(), c); }
    double objective_value() { return -t_(rows(), cols()); }
    std::vector<Eigen::Index>& basis() { return basis_; }

    void set_objective(const Vector& costs) {
        t_.row(rows()).setZero();
        t_.row(rows()).head(costs.size()) = costs.transpose();
        for (Eigen::Index r = 0; r < rows(); ++r) {
            const double cb = t_(rows(), basis_[static_cast<std::size_t>(r)]);
            if (cb != 0.0) t_.row(rows()) -= cb * t_.row(r);
        }
    }

    void pivot(Eigen::Index row, Eigen::Index col) {
        t_.row(row) /= t_(row, col);
        for (Eigen::Index r = 0; r <= rows(); ++r) {
            if (r == row) continue;
            const double factor = t_(r, col);
            if (factor != 0.0) {
                t_.row(r) -= factor * t_.row(row);
                t_(r, col) = 0.0;
            }
        }
        t_(row, col) = 1.0;
        basis_[static_cast<std::size_t>(row)] = col;
    }

    // Runs Bland's rule until optimal; columns >= allowed_cols never enter.
    // Returns false if unbounded.
    bool optimize(Eigen::Index allowed_cols, double tol, std::size_t& iterations, std::size_t cap) {
        while (true) {
            Eigen::Index entering = -1;
            for (Eigen::Index c = 0; c < allowed_cols; ++c) {
                if (cost(c) < -tol) {
                    entering = c;
                    break;
                }
            }
            if (entering < 0) return true;

            Eigen::Index leaving = -1;
            double best_ratio = kInfinity;
            for (Eigen::Index r = 0; r < rows(); ++r) {
                const double coef = at(r, entering);
                if (coef <= tol) continue;
                const double ratio = std::max(rhs(r), 0.0) / coef;
                const auto var = basis_[static_cast<std::size_t>(r)];
                if (leaving < 0 || ratio < best_ratio - 1e-12) {
                    leaving = r;
                    best_ratio = ratio;
                } else if (ratio <= best_ratio + 1e-12 && var < basis_[static_cast<std::size_t>(leaving)]) {
                    leaving = r;
                    best_ratio = std::min(best_ratio, ratio);
                }
            }
            if (leaving < 0) return false;
            if (++iterations > cap) {
                throw Error(ErrorKind::SolverStalled,
                            "simplex exceeded " + std::to_string(cap) + " iterations");
            }
            pivot(leaving, entering);
        }
    }

private:
    Matrix t_;
    std::vector<Eigen::Index> basis_;
};

} // namespace

LpResult simplex_solve(const LinearProgram& lp, const SimplexOptions& options) {
    const auto n = static_cast<Eigen::Index>(lp.num_variables());
    const auto m0 = static_cast<Eigen::Index>(lp.num_constraints());
    if (lp.a.cols() != n || lp.b.size() != m0 || lp.lower.size() != n || lp.upper.size() != n) {
        throw Error(ErrorKind::DimensionMismatch, "linear program has inconsistent dimensions");
    }
    if (!lp.objective.allFinite()) throw Error(ErrorKind::InvalidArgument, "objective must be finite");
    const double tol = options.tol;

    LpResult result;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (lp.lower[j] > lp.upper[j]) return result; // Infeasible
    }

    // Map every variable onto non-negative columns.
    std::vector<ColumnMap> maps(static_cast<std::size_t>(n));
    Eigen::Index std_cols = 0;
    std::vector<std::pair<Eigen::Index, double>> range_rows; // column, width
    for (Eigen::Index j = 0; j < n; ++j) {
        auto& map = maps[static_cast<std::size_t>(j)];
        const bool lo_finite = std::isfinite(lp.lower[j]);
        const bool hi_finite = std::isfinite(lp.upper[j]);
        map.column = std_cols;
        if (lo_finite) {
            map.kind = ColumnMap::Shift;
            map.anchor = lp.lower[j];
            if (hi_finite) range_rows.emplace_back(std_cols, lp.upper[j] - lp.lower[j]);
            std_cols += 1;
        } else if (hi_finite) {
            map.kind = ColumnMap::Reflect;
            map.anchor = lp.upper[j];
            std_cols += 1;
        } else {
            map.kind = ColumnMap::Split;
            std_cols += 2;
        }
    }

    const Eigen::Index m = m0 + static_cast<Eigen::Index>(range_rows.size());
    Matrix a_std = Matrix::Zero(m, std_cols);
    Vector b_std(m);
    Vector c_std = Vector::Zero(std_cols);
    b_std.head(m0) = lp.b;
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& map = maps[static_cast<std::size_t>(j)];
        const auto col = lp.a.col(j);
        switch (map.kind) {
        case ColumnMap::Shift:
            a_std.col(map.column).head(m0) = col;
            b_std.head(m0) -= col * map.anchor;
            c_std[map.column] = lp.objective[j];
            break;
        case ColumnMap::Reflect:
            a_std.col(map.column).head(m0) = -col;
            b_std.head(m0) -= col * map.anchor;
            c_std[map.column] = -lp.objective[j];
            break;
        case ColumnMap::Split:
            a_std.col(map.column).head(m0) = col;
            a_std.col(map.column + 1).head(m0) = -col;
            c_std[map.column] = lp.objective[j];
            c_std[map.column + 1] = -lp.objective[j];
            break;
        }
    }
    for (std::size_t i = 0; i < range_rows.size(); ++i) {
        const auto row = m0 + static_cast<Eigen::Index>(i);
        a_std(row, range_rows[i].first) = 1.0;
        b_std[row] = range_rows[i].second;
    }

    // Columns: structural | slack (m) | artificial (one per negative rhs row).
    std::vector<Eigen::Index> negative_rows;
    for (Eigen::Index r = 0; r < m; ++r) {
        if (b_std[r] < 0.0) negative_rows.push_back(r);
    }
    const Eigen::Index slack0 = std_cols;
    const Eigen::Index art0 = slack0 + m;
    const Eigen::Index total = art0 + static_cast<Eigen::Index>(negative_rows.size());

    Tableau tab(m, total);
    Eigen::Index next_art = art0;
    for (Eigen::Index r = 0; r < m; ++r) {
        const double sign = b_std[r] < 0.0 ? -1.0 : 1.0;
        for (Eigen::Index c = 0; c < std_cols; ++c) tab.at(r, c) = sign * a_std(r, c);
        tab.at(r, slack0 + r) = sign;
        tab.rhs(r) = sign * b_std[r];
        if (sign < 0.0) {
            tab.at(r, next_art) = 1.0;
            tab.basis()[static_cast<std::size_t>(r)] = next_art++;
        } else {
            tab.basis()[static_cast<std::size_t>(r)] = slack0 + r;
        }
    }

    std::size_t iterations = 0;
    if (total > art0) {
        Vector phase1 = Vector::Zero(total);
        phase1.tail(total - art0).setOnes();
        tab.set_objective(phase1);
        tab.optimize(total, tol, iterations, options.max_iterations);
        const double scale = std::max(1.0, b_std.cwiseAbs().maxCoeff());
        if (tab.objective_value() > tol * scale * 10.0) {
            result.iterations = iterations;
            return result; // Infeasible
        }
        // Drive remaining artificials out of the basis where possible.
        for (Eigen::Index r = 0; r < m; ++r) {
            if (tab.basis()[static_cast<std::size_t>(r)] < art0) continue;
            for (Eigen::Index c = 0; c < art0; ++c) {
                if (std::abs(tab.at(r, c)) > tol) {
                    tab.pivot(r, c);
                    break;
                }
            }
        }
    }

    Vector phase2 = Vector::Zero(total);
    phase2.head(std_cols) = c_std;
    tab.set_objective(phase2);
    const bool bounded = tab.optimize(art0, tol, iterations, options.max_iterations);
    result.iterations = iterations;
    if (!bounded) {
        result.status = LpStatus::Unbounded;
        return result;
    }

    Vector y = Vector::Zero(total);
    for (Eigen::Index r = 0; r < m; ++r) {
        const auto var = tab.basis()[static_cast<std::size_t>(r)];
        y[var] = std::max(tab.rhs(r), 0.0);
    }
    result.x.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& map = maps[static_cast<std::size_t>(j)];
        switch (map.kind) {
        case ColumnMap::Shift: result.x[j] = map.anchor + y[map.column]; break;
        case ColumnMap::Reflect: result.x[j] = map.anchor - y[map.column]; break;
        case ColumnMap::Split: result.x[j] = y[map.column] - y[map.column + 1]; break;
        }
    }
    result.status = LpStatus::Optimal;
    result.value = lp.objective.dot(result.x);
    return result;
}

} // namespace certkit
