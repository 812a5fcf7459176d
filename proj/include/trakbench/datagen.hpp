#pragma once

#include <cstdint>
#include <string>

#include "trakbench/model.hpp"
#include "trakbench/rng.hpp"

// Synthetic benchmark inputs: Toeplitz-covariance Gaussian designs,
// normalized true parameters, and responses drawn from the model's own
// likelihood.

namespace trakbench {

enum class BetaNormRule {
    // ||beta*||^2 = p for single-block parameters; (K-1)p under the
    // vec(W) convention for multiclass (one uniform scale for all rows).
    kNormSqEqualsP,
};

enum class CovarianceRule {
    kUnscaled,             // Sigma = T as built from the decay
    kQuadFormUnit,         // beta*' Sigma beta* = 1  (GLM protocol)
    kSpectralInvBetaNorm,  // ||Sigma|| = 1 / ||beta*||  (multiclass protocol)
};

std::string to_string(CovarianceRule rule);
CovarianceRule covariance_rule_from_string(const std::string& name);

struct DesignConfig {
    int n = 0;
    int p = 0;
    int num_classes = 0;  // K >= 3 selects the multiclass parameter layout
    double decay = 0.1;   // cor(X_j, X_j') = decay^{|j - j'|}
    uint64_t seed = 0;
    BetaNormRule beta_norm_rule = BetaNormRule::kNormSqEqualsP;
    CovarianceRule cov_rule = CovarianceRule::kQuadFormUnit;

    int param_dim() const { return num_classes >= 3 ? (num_classes - 1) * p : p; }
    void validate() const;
};

// The unscaled correlation matrix T with T_jj' = decay^{|j-j'|}.
MatrixXd toeplitz_matrix(int p, double decay);

// Multiplier c such that Sigma = c T satisfies cfg.cov_rule for the beta*
// this cfg generates.
double covariance_scale(const DesignConfig& cfg);

// n x p design with i.i.d. N(0, c T) rows, sampled through the Cholesky
// factor of T; reproducible from cfg.seed (stream kDesign).
MatrixXd toeplitz_design(const DesignConfig& cfg);

// Extra rows from the same N(0, c T) law on an independent stream (e.g.
// kTestDesign for held-out points).
MatrixXd sample_design_rows(const DesignConfig& cfg, int rows, rng::StreamId stream);

// True parameter: i.i.d. standard normal entries rescaled to the norm rule;
// stream kTrueBeta.
VectorXd make_true_beta(const DesignConfig& cfg);

// Responses from q(y | f(x, beta*)):
//   logistic   Bernoulli(sigmoid(x'beta*))
//   Poisson    Poisson(softplus(x'beta*))
//   multiclass Multinomial(softmax(W* x, 0)), labels in {1..K}
//   squared    x'beta* + N(0,1)
VectorXd sample_responses(const ModelSpec& spec, const MatrixXd& features,
                          const VectorXd& beta_star, uint64_t seed,
                          rng::StreamId stream = rng::StreamId::kResponses);

// Dataset CSV (y first, then the p feature columns) plus a JSON sidecar of
// generation metadata at <path>.meta.json.
void write_dataset_csv(const std::string& path, const Dataset& data,
                       const std::string& metadata_json);
Dataset read_dataset_csv(const std::string& path);

}  // namespace trakbench
