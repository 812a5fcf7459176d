#include "trakbench/model.hpp"

#include <cmath>

namespace trakbench {

namespace {

bool is_integer(double y) { return std::isfinite(y) && y == std::floor(y); }

void check_dims(const ModelSpec& spec, const Eigen::Ref<const VectorXd>& x,
                const Eigen::Ref<const VectorXd>& beta) {
    if (x.size() != spec.p)
        throw std::invalid_argument("feature vector length does not match spec.p");
    if (beta.size() != spec.param_dim())
        throw std::invalid_argument("parameter vector length does not match spec.param_dim()");
}

int multiclass_label(const ModelSpec& spec, double y) {
    if (!is_integer(y) || y < 1 || y > spec.num_classes)
        throw std::invalid_argument("multiclass response must be an integer in {1..K}");
    return static_cast<int>(y);
}

VectorXd multiclass_logits(const ModelSpec& spec, const Eigen::Ref<const VectorXd>& x,
                           const Eigen::Ref<const VectorXd>& beta) {
    const int km1 = spec.num_classes - 1;
    VectorXd logits(km1);
    for (int c = 0; c < km1; ++c)
        logits(c) = beta.segment(static_cast<Eigen::Index>(c) * spec.p, spec.p).dot(x);
    return logits;
}

}  // namespace

namespace detail {

void margin_parts(const VectorXd& logits, int label, int num_classes, MarginParts& out) {
    const int km1 = num_classes - 1;
    double max_other = -std::numeric_limits<double>::infinity();
    for (int j = 1; j <= num_classes; ++j) {
        if (j == label) continue;
        double u = (j < num_classes) ? logits(j - 1) : 0.0;
        max_other = std::max(max_other, u);
    }
    double sum = 0.0;
    for (int j = 1; j <= num_classes; ++j) {
        if (j == label) continue;
        double u = (j < num_classes) ? logits(j - 1) : 0.0;
        sum += std::exp(u - max_other);
    }
    double lse_other = max_other + std::log(sum);

    out.f = ((label < num_classes) ? logits(label - 1) : 0.0) - lse_other;
    out.q.setZero(km1);
    out.coeff.setZero(km1);
    for (int j = 1; j < num_classes; ++j) {
        if (j == label) {
            out.coeff(j - 1) = 1.0;
        } else {
            out.q(j - 1) = std::exp(logits(j - 1) - lse_other);
            out.coeff(j - 1) = -out.q(j - 1);
        }
    }
}

}  // namespace detail

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::kLinearSquared: return "squared";
        case ModelKind::kLinearLogistic: return "logistic";
        case ModelKind::kLinearPoissonSoftplus: return "poisson";
        case ModelKind::kMulticlassMargin: return "multiclass";
        case ModelKind::kOneHiddenLayer: return "one-hidden-layer";
    }
    throw std::logic_error("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "squared") return ModelKind::kLinearSquared;
    if (name == "logistic") return ModelKind::kLinearLogistic;
    if (name == "poisson") return ModelKind::kLinearPoissonSoftplus;
    if (name == "multiclass") return ModelKind::kMulticlassMargin;
    if (name == "one-hidden-layer") return ModelKind::kOneHiddenLayer;
    throw std::invalid_argument("unknown model kind: " + name);
}

Activation Activation::make_tanh() {
    Activation act;
    act.value = [](double a) { return std::tanh(a); };
    act.deriv = [](double a) { double t = std::tanh(a); return 1.0 - t * t; };
    act.second = [](double a) { double t = std::tanh(a); return -2.0 * t * (1.0 - t * t); };
    act.name = "tanh";
    return act;
}

Activation Activation::make_identity() {
    Activation act;
    act.value = [](double a) { return a; };
    act.deriv = [](double) { return 1.0; };
    act.second = [](double) { return 0.0; };
    act.name = "identity";
    return act;
}

int ModelSpec::param_dim() const {
    switch (kind) {
        case ModelKind::kLinearSquared:
        case ModelKind::kLinearLogistic:
        case ModelKind::kLinearPoissonSoftplus:
            return p;
        case ModelKind::kMulticlassMargin:
            return (num_classes - 1) * p;
        case ModelKind::kOneHiddenLayer:
            return hidden * p + hidden;
    }
    throw std::logic_error("unknown model kind");
}

ModelSpec ModelSpec::linear_squared(int p) { return ModelSpec{ModelKind::kLinearSquared, p}; }
ModelSpec ModelSpec::linear_logistic(int p) { return ModelSpec{ModelKind::kLinearLogistic, p}; }
ModelSpec ModelSpec::linear_poisson_softplus(int p) {
    return ModelSpec{ModelKind::kLinearPoissonSoftplus, p};
}

ModelSpec ModelSpec::multiclass_margin(int p, int num_classes) {
    if (num_classes < 3)
        throw std::invalid_argument("multiclass margin requires K >= 3");
    return ModelSpec{ModelKind::kMulticlassMargin, p, num_classes};
}

ModelSpec ModelSpec::one_hidden_layer(int p, int hidden, Activation act) {
    if (hidden < 1) throw std::invalid_argument("one-hidden-layer requires h >= 1");
    ModelSpec spec{ModelKind::kOneHiddenLayer, p};
    spec.hidden = hidden;
    spec.activation = std::move(act);
    return spec;
}

void Dataset::validate(const ModelSpec& spec) const {
    if (n() < 1) throw std::invalid_argument("empty dataset");
    if (p() != spec.p) throw std::invalid_argument("feature dimension does not match spec.p");
    if (responses.size() != n())
        throw std::invalid_argument("responses length does not match row count");
    if (!features.allFinite() || !responses.allFinite())
        throw std::invalid_argument("dataset contains non-finite entries");
    for (int i = 0; i < n(); ++i) {
        double y = responses(i);
        switch (spec.kind) {
            case ModelKind::kLinearLogistic:
                if (y != 0.0 && y != 1.0)
                    throw std::invalid_argument("logistic response must be 0 or 1");
                break;
            case ModelKind::kLinearPoissonSoftplus:
                if (!is_integer(y) || y < 0.0)
                    throw std::invalid_argument("poisson response must be a nonnegative integer");
                break;
            case ModelKind::kMulticlassMargin:
                multiclass_label(spec, y);
                break;
            default:
                break;
        }
    }
}

Dataset Dataset::without_row(int i) const {
    if (i < 0 || i >= n()) throw std::out_of_range("row index out of range");
    Dataset out;
    out.features.resize(n() - 1, p());
    out.responses.resize(n() - 1);
    out.features.topRows(i) = features.topRows(i);
    out.features.bottomRows(n() - 1 - i) = features.bottomRows(n() - 1 - i);
    out.responses.head(i) = responses.head(i);
    out.responses.tail(n() - 1 - i) = responses.tail(n() - 1 - i);
    return out;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

double predict(const ModelSpec& spec, const Eigen::Ref<const VectorXd>& x, double y,
               const Eigen::Ref<const VectorXd>& beta) {
    check_dims(spec, x, beta);
    switch (spec.kind) {
        case ModelKind::kLinearSquared:
        case ModelKind::kLinearLogistic:
        case ModelKind::kLinearPoissonSoftplus:
            return x.dot(beta);
        case ModelKind::kMulticlassMargin: {
            int label = multiclass_label(spec, y);
            detail::MarginParts parts;
            detail::margin_parts(multiclass_logits(spec, x, beta), label, spec.num_classes, parts);
            return parts.f;
        }
        case ModelKind::kOneHiddenLayer: {
            const int h = spec.hidden;
            double out = 0.0;
            for (int l = 0; l < h; ++l) {
                double a = beta.segment(static_cast<Eigen::Index>(l) * spec.p, spec.p).dot(x);
                out += beta(static_cast<Eigen::Index>(h) * spec.p + l) * spec.activation.value(a);
            }
            return out;
        }
    }
    throw std::logic_error("unknown model kind");
}

LossDerivatives loss_derivatives(const ModelSpec& spec, double y, double z) {
    if (!std::isfinite(z)) throw std::invalid_argument("prediction must be finite");
    LossDerivatives out;
    switch (spec.kind) {
        case ModelKind::kLinearSquared:
        case ModelKind::kOneHiddenLayer: {
            double r = y - z;
            out.value = 0.5 * r * r;
            out.first = -r;
            out.second = 1.0;
            return out;
        }
        case ModelKind::kLinearLogistic: {
            if (y != 0.0 && y != 1.0)
                throw std::invalid_argument("logistic response must be 0 or 1");
            out.value = softplus(z) - y * z;
            double s = sigmoid(z);
            out.first = s - y;
            out.second = s * (1.0 - s);
            return out;
        }
        case ModelKind::kLinearPoissonSoftplus: {
            if (!is_integer(y) || y < 0.0)
                throw std::invalid_argument("poisson response must be a nonnegative integer");
            double h = softplus(z);
            double s = sigmoid(z);
            // log y! is constant in beta but kept so reported losses compare
            // across estimators.
            out.value = h - y * std::log(h) + std::lgamma(y + 1.0);
            out.first = s * (1.0 - y / h);
            out.second = s * (1.0 - s) * (1.0 - y / h) + y * s * s / (h * h);
            return out;
        }
        case ModelKind::kMulticlassMargin: {
            // l(s) = log(1 + e^{-s}); the label already entered through f.
            out.value = softplus(-z);
            out.first = -sigmoid(-z);
            out.second = sigmoid(z) * sigmoid(-z);
            return out;
        }
    }
    throw std::logic_error("unknown model kind");
}

VectorXd model_gradient(const ModelSpec& spec, const Eigen::Ref<const VectorXd>& x, double y,
                        const Eigen::Ref<const VectorXd>& beta) {
    check_dims(spec, x, beta);
    switch (spec.kind) {
        case ModelKind::kLinearSquared:
        case ModelKind::kLinearLogistic:
        case ModelKind::kLinearPoissonSoftplus:
            return x;
        case ModelKind::kMulticlassMargin: {
            int label = multiclass_label(spec, y);
            detail::MarginParts parts;
            detail::margin_parts(multiclass_logits(spec, x, beta), label, spec.num_classes, parts);
            VectorXd grad(spec.param_dim());
            for (int c = 0; c < spec.num_classes - 1; ++c)
                grad.segment(static_cast<Eigen::Index>(c) * spec.p, spec.p) = parts.coeff(c) * x;
            return grad;
        }
        case ModelKind::kOneHiddenLayer: {
            const int h = spec.hidden;
            VectorXd grad(spec.param_dim());
            for (int l = 0; l < h; ++l) {
                double a = beta.segment(static_cast<Eigen::Index>(l) * spec.p, spec.p).dot(x);
                double v = beta(static_cast<Eigen::Index>(h) * spec.p + l);
                grad.segment(static_cast<Eigen::Index>(l) * spec.p, spec.p) =
                    v * spec.activation.deriv(a) * x;
                grad(static_cast<Eigen::Index>(h) * spec.p + l) = spec.activation.value(a);
            }
            return grad;
        }
    }
    throw std::logic_error("unknown model kind");
}

bool has_curvature(ModelKind kind) {
    return kind == ModelKind::kMulticlassMargin || kind == ModelKind::kOneHiddenLayer;
}

MatrixXd model_curvature(const ModelSpec& spec, const Eigen::Ref<const VectorXd>& x, double y,
                         const Eigen::Ref<const VectorXd>& beta) {
    check_dims(spec, x, beta);
    const int d = spec.param_dim();
    switch (spec.kind) {
        case ModelKind::kLinearSquared:
        case ModelKind::kLinearLogistic:
        case ModelKind::kLinearPoissonSoftplus:
            return MatrixXd::Zero(d, d);
        case ModelKind::kMulticlassMargin: {
            // hess f = -(diag(q) - q q') (x) x x' over the K-1 class blocks;
            // q has a zero at the true class so that row/column vanishes.
            int label = multiclass_label(spec, y);
            detail::MarginParts parts;
            detail::margin_parts(multiclass_logits(spec, x, beta), label, spec.num_classes, parts);
            const int km1 = spec.num_classes - 1;
            MatrixXd classes = -(MatrixXd(parts.q.asDiagonal()) - parts.q * parts.q.transpose());
            MatrixXd xxt = x * x.transpose();
            MatrixXd hess(d, d);
            for (int a = 0; a < km1; ++a)
                for (int b = 0; b < km1; ++b)
                    hess.block(static_cast<Eigen::Index>(a) * spec.p,
                               static_cast<Eigen::Index>(b) * spec.p, spec.p, spec.p) =
                        classes(a, b) * xxt;
            return hess;
        }
        case ModelKind::kOneHiddenLayer: {
            const int h = spec.hidden;
            MatrixXd hess = MatrixXd::Zero(d, d);
            for (int l = 0; l < h; ++l) {
                double a = beta.segment(static_cast<Eigen::Index>(l) * spec.p, spec.p).dot(x);
                double v = beta(static_cast<Eigen::Index>(h) * spec.p + l);
                Eigen::Index wofs = static_cast<Eigen::Index>(l) * spec.p;
                Eigen::Index vofs = static_cast<Eigen::Index>(h) * spec.p + l;
                hess.block(wofs, wofs, spec.p, spec.p) =
                    v * spec.activation.second(a) * (x * x.transpose());
                hess.block(wofs, vofs, spec.p, 1) = spec.activation.deriv(a) * x;
                hess.block(vofs, wofs, 1, spec.p) =
                    spec.activation.deriv(a) * x.transpose();
            }
            return hess;
        }
    }
    throw std::logic_error("unknown model kind");
}

GradientMatrix gradient_matrix(const ModelSpec& spec, const Dataset& data,
                               const Eigen::Ref<const VectorXd>& beta) {
    if (data.n() < 1) throw std::invalid_argument("empty dataset");
    data.validate(spec);
    GradientMatrix out;
    out.anchor = beta;
    out.rows.resize(data.n(), spec.param_dim());
    for (int i = 0; i < data.n(); ++i)
        out.rows.row(i) =
            model_gradient(spec, data.features.row(i), data.responses(i), beta).transpose();
    return out;
}

double multiclass_accuracy(const ModelSpec& spec, const Eigen::Ref<const VectorXd>& beta,
                           const MatrixXd& features, const VectorXd& labels) {
    if (spec.kind != ModelKind::kMulticlassMargin)
        throw std::invalid_argument("multiclass_accuracy requires a multiclass spec");
    int hits = 0;
    for (int i = 0; i < features.rows(); ++i) {
        VectorXd logits = multiclass_logits(spec, features.row(i), beta);
        int best = spec.num_classes;  // reference class has logit 0
        double best_u = 0.0;
        for (int c = 0; c < spec.num_classes - 1; ++c) {
            if (logits(c) > best_u) {
                best_u = logits(c);
                best = c + 1;
            }
        }
        if (best == static_cast<int>(labels(i))) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(features.rows());
}

double binary_accuracy(const ModelSpec& spec, const Eigen::Ref<const VectorXd>& beta,
                       const MatrixXd& features, const VectorXd& labels) {
    if (spec.kind != ModelKind::kLinearLogistic)
        throw std::invalid_argument("binary_accuracy requires a logistic spec");
    int hits = 0;
    for (int i = 0; i < features.rows(); ++i) {
        double pred = features.row(i).dot(beta) > 0.0 ? 1.0 : 0.0;
        if (pred == labels(i)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(features.rows());
}

}  // namespace trakbench
