#pragma once

#include <limits>
#include <optional>
#include <stdexcept>

#include "trakbench/model.hpp"

// Damped Newton fits for the exact empirical-risk problem, its leave-one-out
// refits, and the linearized surrogate built from gradient features.

namespace trakbench {

struct SolverOptions {
    // Convergence is claimed at gradient norm <= tol_grad * max(1, rows);
    // the loop keeps polishing well past that while progress is cheap, so
    // downstream prediction differences are not limited by the stop rule.
    double tol_grad = 1e-8;
    int max_iter = 100;
    // Optional ridge penalty (0 in all benchmark runs; user rescue only).
    double ridge = 0.0;
    // Abort with converged=false once ||beta|| exceeds this (separable data).
    double divergence_guard = 1e6;
};

struct FitResult {
    VectorXd beta;
    int iterations = 0;
    double grad_norm = std::numeric_limits<double>::infinity();
    bool converged = false;
    double objective = std::numeric_limits<double>::quiet_NaN();
};

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Objective with exact gradient and Hessian, as consumed by newton_solve.
class NewtonObjective {
  public:
    virtual ~NewtonObjective() = default;
    virtual int dim() const = 0;
    virtual int rows() const = 0;
    // Returns the objective value; fills grad/hess when non-null.
    virtual double eval(const VectorXd& beta, VectorXd* grad, MatrixXd* hess) const = 0;
};

// Newton direction from the exact Hessian, Levenberg damping escalated over
// {0, 1e-8, 1e-6, ..., 1e2} when the factorization fails or the step is not
// accepted, and Armijo backtracking (factor 0.5, constant 1e-4).
FitResult newton_solve(const NewtonObjective& objective, const VectorXd& init,
                       const SolverOptions& opts);

// Empirical risk minimizer sum_i l(y_i, f(x_i, beta)).
FitResult fit_erm(const ModelSpec& spec, const Dataset& data, const VectorXd& init,
                  const SolverOptions& opts);

// Exact refit with row i deleted; warm is typically the full-data solution.
FitResult fit_loo(const ModelSpec& spec, const Dataset& data, int i, const VectorXd& warm,
                  const SolverOptions& opts);

// Linear surrogate around a fitted anchor: row i contributes
// l(y_i, g_i'beta + b_i) with g_i = grad f(x_i, anchor) and
// b_i = f(x_i, anchor) - g_i' anchor.
struct LinearizedProblem {
    ModelSpec spec;          // supplies the loss kind
    MatrixXd gradient_rows;  // n x d
    VectorXd offsets;        // b_i
    VectorXd responses;
    VectorXd anchor;         // the expansion point

    int n() const { return static_cast<int>(gradient_rows.rows()); }
    int d() const { return static_cast<int>(gradient_rows.cols()); }

    // Linear predictions g_i'beta + b_i for all rows.
    VectorXd predictions(const Eigen::Ref<const VectorXd>& beta) const;
    // Per-row (l', l'') at beta.
    void loss_derivs(const Eigen::Ref<const VectorXd>& beta, VectorXd& first,
                     VectorXd& second) const;
};

// Requires a converged anchor.
LinearizedProblem build_linearized(const ModelSpec& spec, const Dataset& data,
                                   const FitResult& anchor);

// Fits the surrogate, optionally with one row excluded. init empty means the
// zero vector for full fits; leave-one-out callers warm start from the full
// surrogate solution. Signals "underdetermined linearized problem" when the
// parameter dimension exceeds the (remaining) row count.
FitResult fit_linearized(const LinearizedProblem& problem, std::optional<int> exclude,
                         const SolverOptions& opts,
                         const std::optional<VectorXd>& init = std::nullopt);

}  // namespace trakbench
