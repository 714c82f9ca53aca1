#pragma once

// Dense two-phase primal simplex for small linear programs with bounded
// variables:
//
//     minimize    c'x
//     subject to  a_i'x  (<=, =, >=)  b_i
//                 0 <= x_j <= u_j        (u_j may be +inf)
//
// Nonbasic variables sit at either bound, so upper bounds never become rows.
// Pricing is Dantzig's rule, switching to Bland's rule after a run of
// degenerate pivots to rule out cycling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace p2p::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { kLessEqual, kEqual, kGreaterEqual };

enum class Status { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::kOptimal: return "optimal";
        case Status::kInfeasible: return "infeasible";
        case Status::kUnbounded: return "unbounded";
        case Status::kIterationLimit: return "iteration limit";
    }
    return "unknown";
}

struct Term {
    std::size_t var;
    double coef;
};

class Problem {
public:
    std::size_t add_var(double cost, double upper = kInf) {
        if (upper < 0.0) throw std::invalid_argument("lp::Problem: upper bound must be >= 0");
        cost_.push_back(cost);
        upper_.push_back(upper);
        return cost_.size() - 1;
    }

    void add_row(std::vector<Term> terms, RowSense sense, double rhs) {
        for (const auto& t : terms)
            if (t.var >= cost_.size()) throw std::out_of_range("lp::Problem: row references unknown variable");
        rows_.push_back({std::move(terms), sense, rhs});
    }

    std::size_t num_vars() const { return cost_.size(); }
    std::size_t num_rows() const { return rows_.size(); }
    double cost(std::size_t j) const { return cost_[j]; }
    double upper(std::size_t j) const { return upper_[j]; }

    struct Row {
        std::vector<Term> terms;
        RowSense sense;
        double rhs;
    };
    const std::vector<Row>& rows() const { return rows_; }

private:
    std::vector<double> cost_;
    std::vector<double> upper_;
    std::vector<Row> rows_;
};

struct Options {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-10;
    double pivot_tol = 1e-11;
    std::size_t max_iterations = 100000;
    std::size_t degenerate_run_before_bland = 50;
};

struct Solution {
    Status status = Status::kIterationLimit;
    double objective = 0.0;
    std::vector<double> x;
    std::size_t iterations = 0;
};

namespace detail {

class BoundedSimplex {
public:
    BoundedSimplex(const Problem& p, const Options& opt) : opt_(opt), n_struct_(p.num_vars()) {
        build(p);
    }

    Solution run() {
        Solution sol;
        if (!artificial_in_use_) {
            phase_ = 2;
            set_phase_costs();
            sol.status = iterate(sol.iterations);
        } else {
            phase_ = 1;
            set_phase_costs();
            Status st = iterate(sol.iterations);
            if (st != Status::kOptimal) {
                sol.status = st == Status::kUnbounded ? Status::kInfeasible : st;
                return sol;
            }
            double infeas = 0.0;
            for (std::size_t i = 0; i < m_; ++i)
                if (is_artificial(basis_[i])) infeas += std::max(beta_[i], 0.0);
            for (std::size_t j = first_artificial_; j < ncols_; ++j)
                if (!basic_[j] && at_upper_[j]) infeas += upper_[j];
            if (infeas > opt_.feasibility_tol * (1.0 + rhs_scale_)) {
                sol.status = Status::kInfeasible;
                return sol;
            }
            // Artificials are pinned to zero for phase 2; basic ones stay
            // degenerate and can only leave.
            for (std::size_t j = first_artificial_; j < ncols_; ++j) {
                upper_[j] = 0.0;
                at_upper_[j] = false;
            }
            phase_ = 2;
            set_phase_costs();
            sol.status = iterate(sol.iterations);
        }
        if (sol.status != Status::kOptimal) return sol;

        sol.x.assign(n_struct_, 0.0);
        for (std::size_t j = 0; j < n_struct_; ++j)
            if (!basic_[j] && at_upper_[j]) sol.x[j] = upper_[j];
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] < n_struct_) sol.x[basis_[i]] = std::clamp(beta_[i], 0.0, upper_[basis_[i]]);
        sol.objective = 0.0;
        for (std::size_t j = 0; j < n_struct_; ++j) sol.objective += cost_[j] * sol.x[j];
        return sol;
    }

private:
    bool is_artificial(std::size_t j) const { return j >= first_artificial_; }
    double& tab(std::size_t i, std::size_t j) { return tableau_[i * ncols_ + j]; }
    double tab(std::size_t i, std::size_t j) const { return tableau_[i * ncols_ + j]; }

    void build(const Problem& p) {
        m_ = p.num_rows();
        std::size_t n_slack = 0;
        for (const auto& r : p.rows())
            if (r.sense != RowSense::kEqual) ++n_slack;

        // Dense row images with slacks.
        const std::size_t n_sa = n_struct_ + n_slack;
        std::vector<std::vector<double>> dense(m_, std::vector<double>(n_sa, 0.0));
        std::vector<double> rhs(m_);
        cost_.assign(n_sa, 0.0);
        upper_.assign(n_sa, kInf);
        for (std::size_t j = 0; j < n_struct_; ++j) {
            cost_[j] = p.cost(j);
            upper_[j] = p.upper(j);
        }
        std::size_t slack = n_struct_;
        for (std::size_t i = 0; i < m_; ++i) {
            const auto& r = p.rows()[i];
            for (const auto& t : r.terms) dense[i][t.var] += t.coef;
            if (r.sense == RowSense::kLessEqual) dense[i][slack++] = 1.0;
            if (r.sense == RowSense::kGreaterEqual) dense[i][slack++] = -1.0;
            rhs[i] = r.rhs;
            if (rhs[i] < 0.0) {
                for (double& v : dense[i]) v = -v;
                rhs[i] = -rhs[i];
            }
            rhs_scale_ = std::max(rhs_scale_, rhs[i]);
        }

        // Crash: a column that is nonzero only in row i with a positive
        // coefficient, and whose implied value fits its upper bound, starts
        // basic in row i. Remaining rows get an artificial.
        std::vector<std::size_t> nnz(n_sa, 0), nz_row(n_sa, 0);
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t j = 0; j < n_sa; ++j)
                if (dense[i][j] != 0.0) {
                    ++nnz[j];
                    nz_row[j] = i;
                }
        std::vector<std::size_t> crash(m_, SIZE_MAX);
        for (std::size_t j = 0; j < n_sa; ++j) {
            if (nnz[j] != 1) continue;
            const std::size_t i = nz_row[j];
            const double a = dense[i][j];
            if (crash[i] != SIZE_MAX || a <= 0.0) continue;
            if (rhs[i] / a > upper_[j]) continue;
            crash[i] = j;
        }

        std::size_t n_art = 0;
        for (std::size_t i = 0; i < m_; ++i)
            if (crash[i] == SIZE_MAX) ++n_art;
        artificial_in_use_ = n_art > 0;
        first_artificial_ = n_sa;
        ncols_ = n_sa + n_art;
        cost_.resize(ncols_, 0.0);
        upper_.resize(ncols_, kInf);

        tableau_.assign(m_ * ncols_, 0.0);
        beta_.assign(m_, 0.0);
        basis_.assign(m_, 0);
        basic_.assign(ncols_, false);
        at_upper_.assign(ncols_, false);
        std::size_t art = n_sa;
        for (std::size_t i = 0; i < m_; ++i) {
            double scale = 1.0;
            std::size_t b;
            if (crash[i] != SIZE_MAX) {
                b = crash[i];
                scale = 1.0 / dense[i][b];
            } else {
                b = art++;
            }
            for (std::size_t j = 0; j < n_sa; ++j) tab(i, j) = dense[i][j] * scale;
            tab(i, b) = 1.0;
            beta_[i] = rhs[i] * scale;
            basis_[i] = b;
            basic_[b] = true;
        }
    }

    void set_phase_costs() {
        phase_cost_.assign(ncols_, 0.0);
        if (phase_ == 1) {
            for (std::size_t j = first_artificial_; j < ncols_; ++j) phase_cost_[j] = 1.0;
        } else {
            for (std::size_t j = 0; j < first_artificial_; ++j) phase_cost_[j] = cost_[j];
        }
        reduced_.assign(ncols_, 0.0);
        for (std::size_t j = 0; j < ncols_; ++j) reduced_[j] = phase_cost_[j];
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = phase_cost_[basis_[i]];
            if (cb == 0.0) continue;
            const double* row = &tableau_[i * ncols_];
            for (std::size_t j = 0; j < ncols_; ++j) reduced_[j] -= cb * row[j];
        }
        for (std::size_t i = 0; i < m_; ++i) reduced_[basis_[i]] = 0.0;
    }

    // Returns the entering column or SIZE_MAX at optimality.
    std::size_t price(bool bland) const {
        std::size_t best = SIZE_MAX;
        double best_score = 0.0;
        for (std::size_t j = 0; j < ncols_; ++j) {
            if (basic_[j] || upper_[j] == 0.0) continue;
            const double d = reduced_[j];
            double score = 0.0;
            if (!at_upper_[j] && d < -opt_.optimality_tol) score = -d;
            else if (at_upper_[j] && d > opt_.optimality_tol) score = d;
            else continue;
            if (bland) return j;
            if (score > best_score) {
                best_score = score;
                best = j;
            }
        }
        return best;
    }

    Status iterate(std::size_t& iterations) {
        std::size_t degenerate_run = 0;
        while (true) {
            if (iterations >= opt_.max_iterations) return Status::kIterationLimit;
            const bool bland = degenerate_run >= opt_.degenerate_run_before_bland;
            const std::size_t q = price(bland);
            if (q == SIZE_MAX) return Status::kOptimal;
            ++iterations;

            const double dir = at_upper_[q] ? -1.0 : 1.0;
            double theta = upper_[q];  // bound flip distance
            std::size_t leave = SIZE_MAX;
            bool leave_to_upper = false;
            double leave_alpha = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                const double alpha = dir * tab(i, q);
                if (std::abs(alpha) <= opt_.pivot_tol) continue;
                const std::size_t b = basis_[i];
                double limit;
                bool to_upper;
                if (alpha > 0.0) {
                    limit = std::max(beta_[i], 0.0) / alpha;
                    to_upper = false;
                } else {
                    if (upper_[b] == kInf) continue;
                    limit = std::max(upper_[b] - beta_[i], 0.0) / -alpha;
                    to_upper = true;
                }
                bool take;
                if (leave == SIZE_MAX) {
                    take = limit <= theta;
                } else if (limit < theta - 1e-12) {
                    take = true;
                } else if (limit <= theta + 1e-12) {
                    // Tie: Bland picks the smallest index, otherwise prefer
                    // the larger pivot element.
                    take = bland ? b < basis_[leave] : std::abs(alpha) > std::abs(leave_alpha);
                } else {
                    take = false;
                }
                if (take) {
                    theta = std::min(theta, limit);
                    leave = i;
                    leave_to_upper = to_upper;
                    leave_alpha = alpha;
                }
            }
            if (theta == kInf) return Status::kUnbounded;
            degenerate_run = theta <= 1e-12 ? degenerate_run + 1 : 0;

            if (theta != 0.0)
                for (std::size_t i = 0; i < m_; ++i) beta_[i] -= theta * dir * tab(i, q);

            if (leave == SIZE_MAX) {
                at_upper_[q] = !at_upper_[q];
                continue;
            }

            const double entering_value = (at_upper_[q] ? upper_[q] : 0.0) + dir * theta;
            const std::size_t out = basis_[leave];
            basic_[out] = false;
            at_upper_[out] = leave_to_upper;
            basic_[q] = true;
            at_upper_[q] = false;
            basis_[leave] = q;
            beta_[leave] = entering_value;
            pivot(leave, q);
        }
    }

    void pivot(std::size_t r, std::size_t q) {
        double* prow = &tableau_[r * ncols_];
        const double inv = 1.0 / prow[q];
        for (std::size_t j = 0; j < ncols_; ++j) prow[j] *= inv;
        prow[q] = 1.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r) continue;
            double* row = &tableau_[i * ncols_];
            const double f = row[q];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < ncols_; ++j) row[j] -= f * prow[j];
            row[q] = 0.0;
        }
        const double fd = reduced_[q];
        if (fd != 0.0) {
            for (std::size_t j = 0; j < ncols_; ++j) reduced_[j] -= fd * prow[j];
            reduced_[q] = 0.0;
        }
    }

    Options opt_;
    std::size_t n_struct_ = 0;
    std::size_t m_ = 0;
    std::size_t ncols_ = 0;
    std::size_t first_artificial_ = 0;
    bool artificial_in_use_ = false;
    int phase_ = 1;
    double rhs_scale_ = 0.0;

    std::vector<double> tableau_;
    std::vector<double> beta_;
    std::vector<std::size_t> basis_;
    std::vector<bool> basic_;
    std::vector<bool> at_upper_;
    std::vector<double> cost_;
    std::vector<double> upper_;
    std::vector<double> phase_cost_;
    std::vector<double> reduced_;
};

}  // namespace detail

inline Solution solve(const Problem& problem, const Options& options = {}) {
    detail::BoundedSimplex simplex(problem, options);
    return simplex.run();
}

}  // namespace p2p::lp
