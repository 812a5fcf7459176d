#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

// Predictors f(x, beta), their per-kind losses l(y, z), and first/second
// derivatives of both. Everything here is a pure function of its inputs.

namespace trakbench {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ModelKind {
    kLinearSquared,         // f = x'beta, squared loss
    kLinearLogistic,        // f = x'beta, logistic loss, y in {0,1}
    kLinearPoissonSoftplus, // f = x'beta, Poisson loss with softplus mean
    kMulticlassMargin,      // f = true-class log-odds under softmax, margin loss
    kOneHiddenLayer,        // f = v' sigma(W x), squared loss
};

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// Elementwise activation with first and second derivatives.
struct Activation {
    std::function<double(double)> value;
    std::function<double(double)> deriv;
    std::function<double(double)> second;
    std::string name;

    static Activation make_tanh();
    static Activation make_identity();
};

struct ModelSpec {
    ModelKind kind = ModelKind::kLinearSquared;
    int p = 0;            // feature dimension
    int num_classes = 0;  // K, multiclass only (K >= 3)
    int hidden = 0;       // h, one-hidden-layer only
    Activation activation;

    // Parameter dimension d: p for linear kinds, (K-1)p for multiclass,
    // h*p + h for the one-hidden-layer network.
    int param_dim() const;

    static ModelSpec linear_squared(int p);
    static ModelSpec linear_logistic(int p);
    static ModelSpec linear_poisson_softplus(int p);
    static ModelSpec multiclass_margin(int p, int num_classes);
    static ModelSpec one_hidden_layer(int p, int hidden,
                                      Activation act = Activation::make_tanh());
};

struct Dataset {
    MatrixXd features;   // n x p
    VectorXd responses;  // length n; codomain depends on the model kind

    int n() const { return static_cast<int>(features.rows()); }
    int p() const { return static_cast<int>(features.cols()); }

    // Throws std::invalid_argument on empty data, non-finite entries, or
    // responses outside the kind's codomain ({0,1} logistic, nonnegative
    // integers Poisson, {1..K} multiclass).
    void validate(const ModelSpec& spec) const;

    Dataset without_row(int i) const;
};

// Value and the first two derivatives of l(y, z) in the prediction z.
struct LossDerivatives {
    double value = 0.0;
    double first = 0.0;
    double second = 0.0;
};

// f(x, beta). The response y is part of the evaluation context: the
// multiclass margin predictor is the log-odds of the label's own class
// (with the last class's weights pinned to zero); other kinds ignore y.
double predict(const ModelSpec& spec, const Eigen::Ref<const VectorXd>& x,
               double y, const Eigen::Ref<const VectorXd>& beta);

// (l, l', l'') at prediction z for the loss paired with spec.kind:
//   squared           0.5 (y - z)^2            (also the one-hidden-layer loss)
//   logistic          log(1 + e^z) - y z
//   Poisson-softplus  h(z) - y log h(z) + log y!,  h = softplus
//   multiclass margin log(1 + e^{-z})          (y enters through f, not l)
LossDerivatives loss_derivatives(const ModelSpec& spec, double y, double z);

// grad_beta f(x, beta); length param_dim().
VectorXd model_gradient(const ModelSpec& spec, const Eigen::Ref<const VectorXd>& x,
                        double y, const Eigen::Ref<const VectorXd>& beta);

// hess_beta f(x, beta); identically zero for linear kinds (see has_curvature).
MatrixXd model_curvature(const ModelSpec& spec, const Eigen::Ref<const VectorXd>& x,
                         double y, const Eigen::Ref<const VectorXd>& beta);
bool has_curvature(ModelKind kind);

struct GradientMatrix {
    MatrixXd rows;       // n x d, row i = grad f(x_i, anchor)
    VectorXd anchor;     // evaluation point
};

GradientMatrix gradient_matrix(const ModelSpec& spec, const Dataset& data,
                               const Eigen::Ref<const VectorXd>& beta);

// Shared scalar helpers.
double sigmoid(double z);
double softplus(double z);

namespace detail {

// Pieces of the margin predictor at logits u = (W_1'x, ..., W_{K-1}'x) with
// the reference class K pinned to logit 0:
//   f     = u_y - logsumexp_{j != y}(u_j)
//   q     = softmax restricted to the non-true classes (entry y-1 is 0)
//   coeff = (1_y - p) / (1 - p_y) = 1_y - q, the per-class gradient weights
struct MarginParts {
    double f = 0.0;
    VectorXd coeff;
    VectorXd q;
};

void margin_parts(const VectorXd& logits, int label, int num_classes, MarginParts& out);

}  // namespace detail

// Fraction of rows whose argmax class under the softmax logits matches the
// label; multiclass kinds only.
double multiclass_accuracy(const ModelSpec& spec, const Eigen::Ref<const VectorXd>& beta,
                           const MatrixXd& features, const VectorXd& labels);
double binary_accuracy(const ModelSpec& spec, const Eigen::Ref<const VectorXd>& beta,
                       const MatrixXd& features, const VectorXd& labels);

}  // namespace trakbench
