#include "trakbench/solver.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <utility>

namespace trakbench {

namespace {

// Scalar-predictor objective sum_i l(y_i, m_i'beta + b_i) on an explicit row
// matrix. Both the exact fit of a linear-predictor model (rows = X, b = 0)
// and every linearized surrogate run through this one code path, so the two
// routes perform identical arithmetic whenever f itself is linear.
class GlmObjective final : public NewtonObjective {
  public:
    GlmObjective(const ModelSpec& spec, const MatrixXd& rows, const VectorXd& offsets,
                 const VectorXd& responses, double ridge)
        : spec_(spec), rows_(rows), offsets_(offsets), responses_(responses), ridge_(ridge) {}

    int dim() const override { return static_cast<int>(rows_.cols()); }
    int rows() const override { return static_cast<int>(rows_.rows()); }

    double eval(const VectorXd& beta, VectorXd* grad, MatrixXd* hess) const override {
        VectorXd z = rows_ * beta;
        z += offsets_;
        if (!z.allFinite()) return std::numeric_limits<double>::infinity();
        const int n = rows();
        double value = 0.0;
        VectorXd first(n), second(n);
        for (int i = 0; i < n; ++i) {
            LossDerivatives ld = loss_derivatives(spec_, responses_(i), z(i));
            value += ld.value;
            first(i) = ld.first;
            second(i) = ld.second;
        }
        if (ridge_ > 0.0) value += 0.5 * ridge_ * beta.squaredNorm();
        if (grad) {
            grad->noalias() = rows_.transpose() * first;
            if (ridge_ > 0.0) *grad += ridge_ * beta;
        }
        if (hess) {
            hess->noalias() = rows_.transpose() * (second.asDiagonal() * rows_);
            if (ridge_ > 0.0) hess->diagonal().array() += ridge_;
        }
        return value;
    }

  private:
    const ModelSpec& spec_;
    const MatrixXd& rows_;
    const VectorXd& offsets_;
    const VectorXd& responses_;
    double ridge_;
};

// Exact multiclass-margin risk. The per-sample Hessian is
// (l'' c c' - l' (diag(q) - q q')) (x) x x', so each (a, b) class block is a
// weighted Gram matrix of the design.
class MulticlassErmObjective final : public NewtonObjective {
  public:
    MulticlassErmObjective(const ModelSpec& spec, const MatrixXd& features,
                           const VectorXd& responses, double ridge)
        : spec_(spec), features_(features), responses_(responses), ridge_(ridge) {}

    int dim() const override { return spec_.param_dim(); }
    int rows() const override { return static_cast<int>(features_.rows()); }

    double eval(const VectorXd& beta, VectorXd* grad, MatrixXd* hess) const override {
        const int n = rows();
        const int p = spec_.p;
        const int km1 = spec_.num_classes - 1;
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            weights(beta.data(), km1, p);
        MatrixXd logits = features_ * weights.transpose();  // n x (K-1)
        if (!logits.allFinite()) return std::numeric_limits<double>::infinity();

        double value = 0.0;
        MatrixXd coeff_scaled, coeff, restricted;
        VectorXd first(n), second(n);
        if (grad) coeff_scaled.resize(n, km1);
        if (hess) {
            coeff.resize(n, km1);
            restricted.resize(n, km1);
        }
        VectorXd row_logits(km1);
        detail::MarginParts parts;
        for (int i = 0; i < n; ++i) {
            row_logits = logits.row(i);
            detail::margin_parts(row_logits, static_cast<int>(responses_(i)), spec_.num_classes,
                                 parts);
            LossDerivatives ld = loss_derivatives(spec_, responses_(i), parts.f);
            value += ld.value;
            first(i) = ld.first;
            second(i) = ld.second;
            if (grad) coeff_scaled.row(i) = ld.first * parts.coeff.transpose();
            if (hess) {
                coeff.row(i) = parts.coeff.transpose();
                restricted.row(i) = parts.q.transpose();
            }
        }
        if (ridge_ > 0.0) value += 0.5 * ridge_ * beta.squaredNorm();

        if (grad) {
            grad->resize(dim());
            MatrixXd grad_blocks = coeff_scaled.transpose() * features_;  // (K-1) x p
            for (int c = 0; c < km1; ++c)
                grad->segment(static_cast<Eigen::Index>(c) * p, p) = grad_blocks.row(c);
            if (ridge_ > 0.0) *grad += ridge_ * beta;
        }
        if (hess) {
            hess->resize(dim(), dim());
            VectorXd w(n);
            for (int a = 0; a < km1; ++a) {
                for (int b = a; b < km1; ++b) {
                    w = second.cwiseProduct(coeff.col(a)).cwiseProduct(coeff.col(b)) +
                        first.cwiseProduct(restricted.col(a)).cwiseProduct(restricted.col(b));
                    if (a == b) w -= first.cwiseProduct(restricted.col(a));
                    MatrixXd block = features_.transpose() * (w.asDiagonal() * features_);
                    hess->block(static_cast<Eigen::Index>(a) * p,
                                static_cast<Eigen::Index>(b) * p, p, p) = block;
                    if (a != b)
                        hess->block(static_cast<Eigen::Index>(b) * p,
                                    static_cast<Eigen::Index>(a) * p, p, p) = block.transpose();
                }
            }
            if (ridge_ > 0.0) hess->diagonal().array() += ridge_;
        }
        return value;
    }

  private:
    const ModelSpec& spec_;
    const MatrixXd& features_;
    const VectorXd& responses_;
    double ridge_;
};

// Row-by-row assembly through model_gradient / model_curvature; used for the
// one-hidden-layer network where no block structure is worth exploiting.
class GenericErmObjective final : public NewtonObjective {
  public:
    GenericErmObjective(const ModelSpec& spec, const MatrixXd& features,
                        const VectorXd& responses, double ridge)
        : spec_(spec), features_(features), responses_(responses), ridge_(ridge) {}

    int dim() const override { return spec_.param_dim(); }
    int rows() const override { return static_cast<int>(features_.rows()); }

    double eval(const VectorXd& beta, VectorXd* grad, MatrixXd* hess) const override {
        const int n = rows();
        const int d = dim();
        double value = 0.0;
        if (grad) grad->setZero(d);
        if (hess) hess->setZero(d, d);
        VectorXd x(spec_.p);
        for (int i = 0; i < n; ++i) {
            x = features_.row(i);
            double z = predict(spec_, x, responses_(i), beta);
            if (!std::isfinite(z)) return std::numeric_limits<double>::infinity();
            LossDerivatives ld = loss_derivatives(spec_, responses_(i), z);
            value += ld.value;
            if (grad || hess) {
                VectorXd g = model_gradient(spec_, x, responses_(i), beta);
                if (grad) *grad += ld.first * g;
                if (hess) {
                    hess->noalias() += ld.second * (g * g.transpose());
                    if (has_curvature(spec_.kind))
                        *hess += ld.first * model_curvature(spec_, x, responses_(i), beta);
                }
            }
        }
        if (ridge_ > 0.0) {
            value += 0.5 * ridge_ * beta.squaredNorm();
            if (grad) *grad += ridge_ * beta;
            if (hess) hess->diagonal().array() += ridge_;
        }
        return value;
    }

  private:
    const ModelSpec& spec_;
    const MatrixXd& features_;
    const VectorXd& responses_;
    double ridge_;
};

FitResult solve_erm(const ModelSpec& spec, const Dataset& data, const VectorXd& init,
                    const SolverOptions& opts, const VectorXd& zero_offsets) {
    switch (spec.kind) {
        case ModelKind::kLinearSquared:
        case ModelKind::kLinearLogistic:
        case ModelKind::kLinearPoissonSoftplus: {
            GlmObjective objective(spec, data.features, zero_offsets, data.responses, opts.ridge);
            return newton_solve(objective, init, opts);
        }
        case ModelKind::kMulticlassMargin: {
            MulticlassErmObjective objective(spec, data.features, data.responses, opts.ridge);
            return newton_solve(objective, init, opts);
        }
        case ModelKind::kOneHiddenLayer: {
            GenericErmObjective objective(spec, data.features, data.responses, opts.ridge);
            return newton_solve(objective, init, opts);
        }
    }
    throw std::logic_error("unknown model kind");
}

}  // namespace

FitResult newton_solve(const NewtonObjective& objective, const VectorXd& init,
                       const SolverOptions& opts) {
    static constexpr double kDampingLadder[] = {0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2};
    static const bool kTrace = std::getenv("TRAKBENCH_TRACE") != nullptr;
    const int d = objective.dim();
    if (init.size() != d)
        throw std::invalid_argument("init length does not match problem dimension");
    const double tol = opts.tol_grad * std::max(1, objective.rows());
    // Keep polishing well below the contract tolerance; Newton gets there in
    // one or two extra steps and downstream influence differences need it.
    const double polish_tol = tol * 1e-6;

    VectorXd beta = init;
    VectorXd grad(d);
    MatrixXd hess(d, d);
    double value = objective.eval(beta, &grad, &hess);
    if (!std::isfinite(value)) throw SolverError("non-finite objective at the initial point");

    bool diverged = false;
    double grad_norm = grad.norm();
    int iter = 0;
    while (iter < opts.max_iter) {
        if (grad_norm <= polish_tol) break;
        if (beta.norm() > opts.divergence_guard) {
            diverged = true;
            break;
        }

        bool have_direction = false;
        bool accepted = false;
        VectorXd candidate;
        const double value_resolution =
            16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(value));
        for (double damping : kDampingLadder) {
            MatrixXd damped = hess;
            if (damping > 0.0) damped.diagonal().array() += damping;
            Eigen::LLT<MatrixXd> llt(damped);
            if (llt.info() != Eigen::Success) continue;
            VectorXd direction = -llt.solve(grad);
            if (!direction.allFinite()) continue;  // LLT accepts NaN inputs silently
            double descent = grad.dot(direction);
            if (!(descent < 0.0)) continue;
            have_direction = true;
            if (std::abs(descent) <= value_resolution) {
                // The objective can no longer resolve the decrease; polish on
                // the gradient instead: take the undamped step iff it shrinks.
                candidate = beta + direction;
                VectorXd candidate_grad(d);
                double trial = objective.eval(candidate, &candidate_grad, nullptr);
                if (std::isfinite(trial) && candidate_grad.norm() < grad_norm) accepted = true;
                break;
            }
            double step = 1.0;
            while (step >= 0x1.0p-60) {
                candidate = beta + step * direction;
                double trial = objective.eval(candidate, nullptr, nullptr);
                if (std::isfinite(trial) && trial <= value + 1e-4 * step * descent) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (accepted) break;
        }
        if (!have_direction)
            throw SolverError("hessian factorization failed after maximum damping escalation");
        if (!accepted) break;  // no descent available at this precision

        double previous_norm = grad_norm;
        beta = std::move(candidate);
        value = objective.eval(beta, &grad, &hess);
        grad_norm = grad.norm();
        ++iter;
        if (kTrace)
            std::fprintf(stderr, "newton iter=%d grad=%.6g value=%.17g\n", iter, grad_norm,
                         value);
        // Quadratic convergence keeps halving the gradient until the
        // floating-point floor; once it stalls there with the contract met,
        // stop.
        if (grad_norm <= tol && grad_norm >= 0.25 * previous_norm) break;
    }
    if (beta.norm() > opts.divergence_guard) diverged = true;

    FitResult out;
    out.beta = std::move(beta);
    out.iterations = iter;
    out.grad_norm = grad_norm;
    out.objective = value;
    out.converged = !diverged && grad_norm <= tol;
    return out;
}

FitResult fit_erm(const ModelSpec& spec, const Dataset& data, const VectorXd& init,
                  const SolverOptions& opts) {
    data.validate(spec);
    if (init.size() != spec.param_dim())
        throw std::invalid_argument("init length does not match spec.param_dim()");
    VectorXd zero_offsets = VectorXd::Zero(data.n());
    return solve_erm(spec, data, init, opts, zero_offsets);
}

FitResult fit_loo(const ModelSpec& spec, const Dataset& data, int i, const VectorXd& warm,
                  const SolverOptions& opts) {
    if (i < 0 || i >= data.n()) throw std::out_of_range("leave-one-out index out of range");
    if (data.n() < 2) throw std::invalid_argument("empty objective");
    Dataset reduced = data.without_row(i);
    return fit_erm(spec, reduced, warm, opts);
}

VectorXd LinearizedProblem::predictions(const Eigen::Ref<const VectorXd>& beta) const {
    VectorXd z = gradient_rows * beta;
    z += offsets;
    return z;
}

void LinearizedProblem::loss_derivs(const Eigen::Ref<const VectorXd>& beta, VectorXd& first,
                                    VectorXd& second) const {
    VectorXd z = predictions(beta);
    first.resize(n());
    second.resize(n());
    for (int i = 0; i < n(); ++i) {
        LossDerivatives ld = loss_derivatives(spec, responses(i), z(i));
        first(i) = ld.first;
        second(i) = ld.second;
    }
}

LinearizedProblem build_linearized(const ModelSpec& spec, const Dataset& data,
                                   const FitResult& anchor) {
    if (!anchor.converged)
        throw std::invalid_argument("anchor fit has not converged");
    data.validate(spec);
    LinearizedProblem out;
    out.spec = spec;
    out.anchor = anchor.beta;
    out.responses = data.responses;
    out.gradient_rows.resize(data.n(), spec.param_dim());
    out.offsets.resize(data.n());
    VectorXd x(spec.p);
    for (int i = 0; i < data.n(); ++i) {
        x = data.features.row(i);
        VectorXd g = model_gradient(spec, x, data.responses(i), anchor.beta);
        // Same contiguous dot on both terms so linear kinds get offsets of
        // exactly zero.
        out.offsets(i) = predict(spec, x, data.responses(i), anchor.beta) - g.dot(anchor.beta);
        out.gradient_rows.row(i) = g.transpose();
    }
    return out;
}

FitResult fit_linearized(const LinearizedProblem& problem, std::optional<int> exclude,
                         const SolverOptions& opts, const std::optional<VectorXd>& init) {
    const int n = problem.n();
    if (exclude && (*exclude < 0 || *exclude >= n))
        throw std::out_of_range("excluded index out of range");
    const int remaining = exclude ? n - 1 : n;
    if (remaining < 1) throw std::invalid_argument("empty objective");
    if (problem.d() > remaining && opts.ridge <= 0.0)
        throw SolverError("underdetermined linearized problem");

    VectorXd start = init ? *init : VectorXd::Zero(problem.d());
    if (start.size() != problem.d())
        throw std::invalid_argument("init length does not match problem dimension");

    if (!exclude) {
        GlmObjective objective(problem.spec, problem.gradient_rows, problem.offsets,
                               problem.responses, opts.ridge);
        return newton_solve(objective, start, opts);
    }

    const int i = *exclude;
    MatrixXd rows(remaining, problem.d());
    VectorXd offsets(remaining), responses(remaining);
    rows.topRows(i) = problem.gradient_rows.topRows(i);
    rows.bottomRows(remaining - i) = problem.gradient_rows.bottomRows(remaining - i);
    offsets.head(i) = problem.offsets.head(i);
    offsets.tail(remaining - i) = problem.offsets.tail(remaining - i);
    responses.head(i) = problem.responses.head(i);
    responses.tail(remaining - i) = problem.responses.tail(remaining - i);
    GlmObjective objective(problem.spec, rows, offsets, responses, opts.ridge);
    return newton_solve(objective, start, opts);
}

}  // namespace trakbench
