#pragma once

#include <optional>
#include <string>
#include <vector>

#include "trakbench/datagen.hpp"
#include "trakbench/influence.hpp"
#include "trakbench/metrics.hpp"

// End-to-end experiment runner: generate (or accept) data, fit, build the
// linearized surrogate, evaluate the requested estimators over the
// removed-point x test-point grid, and emit tables, correlations, rank
// alignments, and scaling fits.

namespace trakbench {

struct ExperimentConfig {
    ModelKind model = ModelKind::kLinearLogistic;
    std::vector<int> n_list{1024};
    std::vector<int> p_list{100};
    int num_classes = 3;          // K, multiclass only
    std::vector<int> k_list;      // projection dimensions for TRAK estimators
    std::vector<int> align_k_list{1, 3, 5, 10, 20, 50};
    int trials = 1;
    int removed_count = 100;
    int test_count = 10;
    std::vector<EstimatorKind> estimators;
    uint64_t seed = 1;
    std::string out_dir = "out";
    double decay = 0.1;
    CovarianceRule cov_rule = CovarianceRule::kQuadFormUnit;
    bool dependent = false;  // also evaluate the z_i = z_new diagonal
    SolverOptions solver;
    int threads = 0;  // 0 = hardware concurrency

    void validate() const;
    DesignConfig design_config(int n, int p, uint64_t seed) const;
    ModelSpec model_spec(int p) const;
};

// Flat key = value text; '#' starts a comment. Unknown keys are rejected.
ExperimentConfig load_config(const std::string& path);

// "true,linear,alo,trak,trak-simplified"; TRAK names expand to one estimator
// per entry of k_list.
std::vector<EstimatorKind> parse_estimators(const std::string& names,
                                            const std::vector<int>& k_list);
std::vector<int> parse_int_list(const std::string& text);

// `count` distinct indices from [0, n), sorted ascending; stream kIndexShuffle.
std::vector<int> sample_indices(int n, int count, uint64_t seed);

// A dataset with its full fit, linearized surrogate, and evaluation grid.
struct FittedBatch {
    ModelSpec spec;
    Dataset train;
    MatrixXd test_features;
    VectorXd test_labels;
    std::vector<int> removed;
    FitResult fit;   // beta-hat
    LinearizedProblem problem;
    FitResult brb;   // beta-breve, the linearized full fit
    MatrixXd test_gradients;  // test_count x d, grad f(x_new, beta-hat)
    VectorXd beta_star;       // empty for real data
    SolverOptions solver_options;
    uint64_t seed = 0;

    double anchor_gap() const { return (fit.beta - brb.beta).norm(); }
};

// Fits and linearizes an existing dataset.
FittedBatch fit_batch(const ModelSpec& spec, Dataset train, MatrixXd test_features,
                      VectorXd test_labels, std::vector<int> removed,
                      const SolverOptions& solver, uint64_t seed);

// Generates the synthetic protocol inputs for one (n, p) cell, then fits.
FittedBatch make_synthetic_batch(const ExperimentConfig& cfg, int n, int p, uint64_t seed);

struct BatchTables {
    std::vector<InfluenceTable> independent;  // one per estimator
    std::vector<InfluenceTable> dependent;    // parallel to independent when requested
    std::vector<std::string> failures;        // human-readable per-entry failures
};

BatchTables compute_tables(const FittedBatch& batch, const std::vector<EstimatorKind>& estimators,
                           bool dependent, int threads);

struct PairCorrelation {
    std::string first, second;
    double value = 0.0;
    int pairs = 0;
};

struct ExperimentCell {
    int trial = 0, n = 0, p = 0;
    FitResult fit, brb;
    double anchor_gap = 0.0;
    std::vector<PairCorrelation> correlations;
    std::vector<std::pair<std::string, RankAlignment>> alignments;  // candidate name, result
    std::vector<std::string> failures;
};

struct ExperimentReport {
    std::vector<ExperimentCell> cells;
    std::vector<std::pair<std::string, ScalingFit>> scalings;  // series name, fit
};

// Runs every (trial, n, p) cell, writes influence CSVs, alignment.csv,
// scaling_<series>.csv and summary.txt under cfg.out_dir, and returns the
// in-memory report. Per-cell failures are recorded and the run continues.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

}  // namespace trakbench
