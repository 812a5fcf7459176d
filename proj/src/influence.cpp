#include "trakbench/influence.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "trakbench/parallel.hpp"
#include "trakbench/rng.hpp"

namespace trakbench {

std::string EstimatorKind::name() const {
    switch (tag) {
        case Tag::kTrue: return "True";
        case Tag::kLinear: return "Linear";
        case Tag::kAlo: return "ALO";
        case Tag::kTrak: return "TRAK";
        case Tag::kTrakSimplified: return "TRAKSimplified";
    }
    throw std::logic_error("unknown estimator tag");
}

Projection make_projection(int d, int k, uint64_t seed) {
    if (k < 1 || k > d) throw std::invalid_argument("projection dimension must satisfy 1 <= k <= d");
    rng::Stream stream(seed, rng::StreamId::kProjection, static_cast<uint32_t>(k));
    Projection proj;
    proj.seed = seed;
    proj.matrix = stream.normal_matrix(d, k);
    return proj;
}

// ---------------------------------------------------------------------------
// True influence

TrueEstimator::TrueEstimator(const ModelSpec& spec, const Dataset& data, const FitResult& fit,
                             const SolverOptions& opts)
    : spec_(spec), data_(&data), fit_(fit), opts_(opts) {
    if (!fit.converged) throw std::invalid_argument("full-data fit has not converged");
    data.validate(spec);
}

void TrueEstimator::precompute(const std::vector<int>& indices, int threads) {
    std::vector<FitResult> fits(indices.size());
    parallel_for(0, static_cast<int>(indices.size()), threads, [&](int j) {
        fits[j] = fit_loo(spec_, *data_, indices[j], fit_.beta, opts_);
    });
    for (size_t j = 0; j < indices.size(); ++j) cache_[indices[j]] = std::move(fits[j]);
}

const FitResult& TrueEstimator::loo_fit(int i) const {
    auto it = cache_.find(i);
    if (it == cache_.end())
        it = cache_.emplace(i, fit_loo(spec_, *data_, i, fit_.beta, opts_)).first;
    if (!it->second.converged) throw LooRefitError(i);
    return it->second;
}

double TrueEstimator::value(int i, const Eigen::Ref<const VectorXd>& x_new, double y_new) const {
    const FitResult& loo = loo_fit(i);
    return predict(spec_, x_new, y_new, loo.beta) - predict(spec_, x_new, y_new, fit_.beta);
}

double influence_true(const ModelSpec& spec, const Dataset& data, const FitResult& fit, int i,
                      const Eigen::Ref<const VectorXd>& x_new, double y_new,
                      const SolverOptions& opts) {
    TrueEstimator estimator(spec, data, fit, opts);
    return estimator.value(i, x_new, y_new);
}

// ---------------------------------------------------------------------------
// Linearized influence

LinearEstimator::LinearEstimator(const LinearizedProblem& problem, const FitResult& brb,
                                 const SolverOptions& opts)
    : problem_(&problem), brb_(brb), opts_(opts) {
    if (!brb.converged) throw std::invalid_argument("linearized fit has not converged");
}

void LinearEstimator::precompute(const std::vector<int>& indices, int threads) {
    std::vector<FitResult> fits(indices.size());
    parallel_for(0, static_cast<int>(indices.size()), threads, [&](int j) {
        fits[j] = fit_linearized(*problem_, indices[j], opts_, brb_.beta);
    });
    for (size_t j = 0; j < indices.size(); ++j) cache_[indices[j]] = std::move(fits[j]);
}

const FitResult& LinearEstimator::loo_fit(int i) const {
    auto it = cache_.find(i);
    if (it == cache_.end())
        it = cache_.emplace(i, fit_linearized(*problem_, i, opts_, brb_.beta)).first;
    if (!it->second.converged) throw LooRefitError(i);
    return it->second;
}

double LinearEstimator::value(int i, const Eigen::Ref<const VectorXd>& g_new) const {
    return g_new.dot(loo_fit(i).beta - brb_.beta);
}

double influence_linear(const LinearizedProblem&, const FitResult& brb, const FitResult& brb_loo,
                        const Eigen::Ref<const VectorXd>& g_new) {
    if (!brb.converged || !brb_loo.converged)
        throw std::invalid_argument("both linearized fits must have converged");
    return g_new.dot(brb_loo.beta - brb.beta);
}

// ---------------------------------------------------------------------------
// ALO influence

AloEstimator::AloEstimator(const LinearizedProblem& problem, const FitResult& brb,
                           double denom_floor)
    : problem_(&problem), denom_floor_(denom_floor) {
    if (!brb.converged) throw std::invalid_argument("linearized fit has not converged");
    problem.loss_derivs(brb.beta, first_, second_);
    MatrixXd hessian = problem.gradient_rows.transpose() *
                       (second_.asDiagonal() * problem.gradient_rows);
    hessian_llt_.compute(hessian);
    if (hessian_llt_.info() != Eigen::Success)
        throw SolverError("ALO hessian is singular (requires n >= d)");
}

VectorXd AloEstimator::solve_row(int i) const {
    if (i < 0 || i >= problem_->n()) throw std::out_of_range("train index out of range");
    auto it = cached_solves_.find(i);
    if (it != cached_solves_.end()) return it->second;
    return hessian_llt_.solve(problem_->gradient_rows.row(i).transpose());
}

void AloEstimator::precompute(const std::vector<int>& indices) {
    for (int i : indices) {
        if (cached_solves_.count(i)) continue;
        cached_solves_[i] = hessian_llt_.solve(problem_->gradient_rows.row(i).transpose());
    }
}

double AloEstimator::denominator(int i) const {
    VectorXd solved = solve_row(i);
    return 1.0 - second_(i) * problem_->gradient_rows.row(i).dot(solved);
}

double AloEstimator::value(int i, const Eigen::Ref<const VectorXd>& g_new) const {
    VectorXd solved = solve_row(i);
    double denom = 1.0 - second_(i) * problem_->gradient_rows.row(i).dot(solved);
    if (denom <= denom_floor_) throw AloBreakdownError(i);
    return first_(i) * g_new.dot(solved) / denom;
}

double influence_alo(const LinearizedProblem& problem, const FitResult& brb, int i,
                     const Eigen::Ref<const VectorXd>& g_new, double denom_floor) {
    AloEstimator estimator(problem, brb, denom_floor);
    return estimator.value(i, g_new);
}

// ---------------------------------------------------------------------------
// TRAK influence

TrakEstimator::TrakEstimator(const LinearizedProblem& problem, const FitResult& brb,
                             const Projection& proj, bool simplified, double denom_floor)
    : problem_(&problem),
      projection_(proj.matrix),
      simplified_(simplified),
      denom_floor_(denom_floor) {
    if (!brb.converged) throw std::invalid_argument("linearized fit has not converged");
    if (proj.d() != problem.d())
        throw std::invalid_argument("projection rows must match the parameter dimension");
    if (proj.k() > problem.n())
        throw std::invalid_argument("projected Gram needs n >= k rows");
    problem.loss_derivs(brb.beta, first_, second_);
    projected_rows_.noalias() = problem.gradient_rows * projection_;  // Phi = G S
    MatrixXd gram;
    if (simplified_) {
        gram.noalias() = projected_rows_.transpose() * projected_rows_;
    } else {
        gram.noalias() =
            projected_rows_.transpose() * (second_.asDiagonal() * projected_rows_);
    }
    gram_llt_.compute(gram);
    if (gram_llt_.info() != Eigen::Success)
        throw SolverError("projected Gram matrix is singular");
}

double TrakEstimator::value(int i, const Eigen::Ref<const VectorXd>& g_new) const {
    if (i < 0 || i >= problem_->n()) throw std::out_of_range("train index out of range");
    VectorXd phi_new = projection_.transpose() * g_new;
    VectorXd solved = gram_llt_.solve(projected_rows_.row(i).transpose());
    if (simplified_) return first_(i) * phi_new.dot(solved);
    double denom = 1.0 - second_(i) * projected_rows_.row(i).dot(solved);
    if (denom <= denom_floor_) throw AloBreakdownError(i);
    return first_(i) * phi_new.dot(solved) / denom;
}

double influence_trak(const LinearizedProblem& problem, const FitResult& brb, int i,
                      const Eigen::Ref<const VectorXd>& g_new, const Projection& proj,
                      bool simplified, double denom_floor) {
    TrakEstimator estimator(problem, brb, proj, simplified, denom_floor);
    return estimator.value(i, g_new);
}

// ---------------------------------------------------------------------------
// Influence tables

void InfluenceTable::set(int train_index, int test_id, double value) {
    if (!std::isfinite(value))
        throw std::invalid_argument("influence values must be finite; use set_breakdown");
    entries[{test_id, train_index}] = Entry{value, false};
}

void InfluenceTable::set_breakdown(int train_index, int test_id) {
    entries[{test_id, train_index}] =
        Entry{std::numeric_limits<double>::quiet_NaN(), true};
}

bool InfluenceTable::has(int train_index, int test_id) const {
    return entries.count({test_id, train_index}) > 0;
}

const InfluenceTable::Entry& InfluenceTable::at(int train_index, int test_id) const {
    auto it = entries.find({test_id, train_index});
    if (it == entries.end()) throw std::out_of_range("no entry for (train, test) pair");
    return it->second;
}

void InfluenceTable::write_csv(std::ostream& out) const {
    out << "estimator,k,train_index,test_id,value,breakdown_flag\n";
    char buffer[64];
    for (const auto& [key, entry] : entries) {
        std::snprintf(buffer, sizeof(buffer), "%.17g", entry.value);
        out << estimator.name() << ',' << estimator.projection_dim << ',' << key.second << ','
            << key.first << ',' << buffer << ',' << (entry.breakdown ? 1 : 0) << '\n';
    }
}

void InfluenceTable::write_csv_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);  // LF line endings everywhere
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_csv(out);
}

InfluenceTable InfluenceTable::read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("estimator,", 0) != 0)
        throw std::runtime_error("missing influence CSV header in " + path);
    InfluenceTable table;
    bool kind_set = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string name, field;
        std::getline(row, name, ',');
        std::getline(row, field, ',');
        int k = std::stoi(field);
        std::getline(row, field, ',');
        int train = std::stoi(field);
        std::getline(row, field, ',');
        int test = std::stoi(field);
        std::getline(row, field, ',');
        double value = std::stod(field);
        std::getline(row, field, ',');
        bool breakdown = field == "1";
        if (!kind_set) {
            EstimatorKind kind;
            if (name == "True") kind = EstimatorKind::true_loo();
            else if (name == "Linear") kind = EstimatorKind::linear();
            else if (name == "ALO") kind = EstimatorKind::alo();
            else if (name == "TRAK") kind = EstimatorKind::trak(k);
            else if (name == "TRAKSimplified") kind = EstimatorKind::trak_simplified(k);
            else throw std::runtime_error("unknown estimator name: " + name);
            table.estimator = kind;
            kind_set = true;
        }
        if (breakdown) table.set_breakdown(train, test);
        else table.set(train, test, value);
    }
    return table;
}

}  // namespace trakbench
