#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "trakbench/solver.hpp"

// The four influence estimators: exact leave-one-out, linearized refit,
// approximate leave-one-out (ALO), and projected TRAK with its simplified
// variant, plus the Gaussian projection machinery.

namespace trakbench {

struct EstimatorKind {
    enum class Tag { kTrue, kLinear, kAlo, kTrak, kTrakSimplified };

    Tag tag = Tag::kTrue;
    int projection_dim = 0;  // k, TRAK variants only (1 <= k <= d)

    static EstimatorKind true_loo() { return {Tag::kTrue, 0}; }
    static EstimatorKind linear() { return {Tag::kLinear, 0}; }
    static EstimatorKind alo() { return {Tag::kAlo, 0}; }
    static EstimatorKind trak(int k) { return {Tag::kTrak, k}; }
    static EstimatorKind trak_simplified(int k) { return {Tag::kTrakSimplified, k}; }

    bool is_trak() const { return tag == Tag::kTrak || tag == Tag::kTrakSimplified; }
    std::string name() const;  // "True", "Linear", "ALO", "TRAK", "TRAKSimplified"
    bool operator<(const EstimatorKind& other) const {
        return std::pair(static_cast<int>(tag), projection_dim) <
               std::pair(static_cast<int>(other.tag), other.projection_dim);
    }
};

// i.i.d. N(0,1) projection, d x k, reproducible from the seed.
struct Projection {
    MatrixXd matrix;
    uint64_t seed = 0;
    int d() const { return static_cast<int>(matrix.rows()); }
    int k() const { return static_cast<int>(matrix.cols()); }
};

Projection make_projection(int d, int k, uint64_t seed);

struct LooRefitError : std::runtime_error {
    explicit LooRefitError(int index)
        : std::runtime_error("LOO refit failed at index " + std::to_string(index)),
          index(index) {}
    int index;
};

struct AloBreakdownError : std::runtime_error {
    explicit AloBreakdownError(int index)
        : std::runtime_error("ALO breakdown at index " + std::to_string(index)), index(index) {}
    int index;
};

// Exact influence: f(x_new, beta_loo(i)) - f(x_new, beta). Caches one exact
// refit per training index; precompute() runs them in parallel. value() and
// loo_fit() are safe to call concurrently only for precomputed indices.
class TrueEstimator {
  public:
    TrueEstimator(const ModelSpec& spec, const Dataset& data, const FitResult& fit,
                  const SolverOptions& opts);

    void precompute(const std::vector<int>& indices, int threads = 1);
    const FitResult& loo_fit(int i) const;  // throws LooRefitError on divergence
    double value(int i, const Eigen::Ref<const VectorXd>& x_new, double y_new) const;

  private:
    ModelSpec spec_;
    const Dataset* data_;
    FitResult fit_;
    SolverOptions opts_;
    mutable std::unordered_map<int, FitResult> cache_;
};

// Linearized influence: g_new'(brb_loo(i) - brb) with warm-started refits of
// the surrogate problem.
class LinearEstimator {
  public:
    LinearEstimator(const LinearizedProblem& problem, const FitResult& brb,
                    const SolverOptions& opts);

    void precompute(const std::vector<int>& indices, int threads = 1);
    const FitResult& loo_fit(int i) const;
    double value(int i, const Eigen::Ref<const VectorXd>& g_new) const;

  private:
    const LinearizedProblem* problem_;
    FitResult brb_;
    SolverOptions opts_;
    mutable std::unordered_map<int, FitResult> cache_;
};

// Closed-form ALO influence
//   l'_i g_new' H^{-1} g_i / (1 - l''_i g_i' H^{-1} g_i),
// H = G' diag(l'') G factorized once and shared by every pair.
class AloEstimator {
  public:
    AloEstimator(const LinearizedProblem& problem, const FitResult& brb,
                 double denom_floor = 1e-8);

    void precompute(const std::vector<int>& indices);
    double value(int i, const Eigen::Ref<const VectorXd>& g_new) const;
    // 1 - l''_i g_i' H^{-1} g_i, the leverage-style denominator (diagnostic).
    double denominator(int i) const;

  private:
    VectorXd solve_row(int i) const;
    const LinearizedProblem* problem_;
    VectorXd first_, second_;
    Eigen::LLT<MatrixXd> hessian_llt_;
    double denom_floor_;
    std::unordered_map<int, VectorXd> cached_solves_;
};

// Projected influence on features phi = S'g. The full form mirrors ALO with
// Phi' diag(l'') Phi; the simplified form drops the loss weights and the
// denominator. The k x k Gram factorization is shared by every pair.
class TrakEstimator {
  public:
    TrakEstimator(const LinearizedProblem& problem, const FitResult& brb, const Projection& proj,
                  bool simplified, double denom_floor = 1e-8);

    double value(int i, const Eigen::Ref<const VectorXd>& g_new) const;

  private:
    const LinearizedProblem* problem_;
    MatrixXd projection_;      // S, d x k
    MatrixXd projected_rows_;  // Phi = G S, n x k
    VectorXd first_, second_;
    Eigen::LLT<MatrixXd> gram_llt_;
    bool simplified_;
    double denom_floor_;
};

// One-shot conveniences mirroring the estimator classes; prefer the classes
// when evaluating many pairs.
double influence_true(const ModelSpec& spec, const Dataset& data, const FitResult& fit, int i,
                      const Eigen::Ref<const VectorXd>& x_new, double y_new,
                      const SolverOptions& opts);
double influence_linear(const LinearizedProblem& problem, const FitResult& brb,
                        const FitResult& brb_loo, const Eigen::Ref<const VectorXd>& g_new);
double influence_alo(const LinearizedProblem& problem, const FitResult& brb, int i,
                     const Eigen::Ref<const VectorXd>& g_new, double denom_floor = 1e-8);
double influence_trak(const LinearizedProblem& problem, const FitResult& brb, int i,
                      const Eigen::Ref<const VectorXd>& g_new, const Projection& proj,
                      bool simplified, double denom_floor = 1e-8);

// (train index, test id) -> influence value, tagged by estimator kind.
// Breakdown entries keep their grid position with a flag instead of a value.
struct InfluenceTable {
    struct Entry {
        double value = std::numeric_limits<double>::quiet_NaN();
        bool breakdown = false;
    };
    struct Meta {
        int n = 0, p = 0, d = 0;
        uint64_t seed = 0;
        std::string model;
    };

    EstimatorKind estimator;
    Meta meta;
    // Keyed (test_id, train_index): the serialized row order.
    std::map<std::pair<int, int>, Entry> entries;

    void set(int train_index, int test_id, double value);
    void set_breakdown(int train_index, int test_id);
    bool has(int train_index, int test_id) const;
    const Entry& at(int train_index, int test_id) const;

    // CSV with header estimator,k,train_index,test_id,value,breakdown_flag,
    // 17 significant digits, LF line endings.
    void write_csv(std::ostream& out) const;
    void write_csv_file(const std::string& path) const;
    static InfluenceTable read_csv_file(const std::string& path);
};

}  // namespace trakbench
