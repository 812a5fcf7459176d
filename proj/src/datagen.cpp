#include "trakbench/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "trakbench/rng.hpp"

namespace trakbench {

void DesignConfig::validate() const {
    if (n < 1) throw std::invalid_argument("design needs n >= 1");
    if (p < 1) throw std::invalid_argument("design needs p >= 1");
    if (!(decay >= 0.0 && decay < 1.0)) throw std::invalid_argument("decay must lie in [0, 1)");
    if (num_classes != 0 && num_classes < 3)
        throw std::invalid_argument("num_classes must be 0 (GLM) or >= 3");
}

std::string to_string(CovarianceRule rule) {
    switch (rule) {
        case CovarianceRule::kUnscaled: return "unscaled";
        case CovarianceRule::kQuadFormUnit: return "quadform";
        case CovarianceRule::kSpectralInvBetaNorm: return "spectral";
    }
    throw std::logic_error("unknown covariance rule");
}

CovarianceRule covariance_rule_from_string(const std::string& name) {
    if (name == "unscaled") return CovarianceRule::kUnscaled;
    if (name == "quadform") return CovarianceRule::kQuadFormUnit;
    if (name == "spectral") return CovarianceRule::kSpectralInvBetaNorm;
    throw std::invalid_argument("unknown covariance rule: " + name);
}

MatrixXd toeplitz_matrix(int p, double decay) {
    MatrixXd t(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) t(i, j) = std::pow(decay, std::abs(i - j));
    return t;
}

VectorXd make_true_beta(const DesignConfig& cfg) {
    cfg.validate();
    rng::Stream stream(cfg.seed, rng::StreamId::kTrueBeta);
    const int d = cfg.param_dim();
    VectorXd beta = stream.normal_vector(d);
    // kNormSqEqualsP: ||beta*||^2 = d (= p for GLM, (K-1)p for multiclass).
    beta *= std::sqrt(static_cast<double>(d)) / beta.norm();
    return beta;
}

double covariance_scale(const DesignConfig& cfg) {
    cfg.validate();
    switch (cfg.cov_rule) {
        case CovarianceRule::kUnscaled:
            return 1.0;
        case CovarianceRule::kQuadFormUnit: {
            if (cfg.num_classes >= 3)
                throw std::invalid_argument("quadform covariance rule applies to GLM layouts");
            VectorXd beta = make_true_beta(cfg);
            MatrixXd t = toeplitz_matrix(cfg.p, cfg.decay);
            return 1.0 / beta.dot(t * beta);
        }
        case CovarianceRule::kSpectralInvBetaNorm: {
            VectorXd beta = make_true_beta(cfg);
            Eigen::SelfAdjointEigenSolver<MatrixXd> eig(toeplitz_matrix(cfg.p, cfg.decay));
            double spectral = eig.eigenvalues().maxCoeff();
            return 1.0 / (spectral * beta.norm());
        }
    }
    throw std::logic_error("unknown covariance rule");
}

MatrixXd sample_design_rows(const DesignConfig& cfg, int rows, rng::StreamId stream_id) {
    cfg.validate();
    if (rows < 1) throw std::invalid_argument("design needs at least one row");
    MatrixXd t = toeplitz_matrix(cfg.p, cfg.decay);
    Eigen::LLT<MatrixXd> llt(t);
    if (llt.info() != Eigen::Success)
        throw std::logic_error("toeplitz correlation matrix is not positive definite");
    double scale = std::sqrt(covariance_scale(cfg));
    rng::Stream stream(cfg.seed, stream_id);
    MatrixXd z = stream.normal_matrix(rows, cfg.p);
    // rows = sqrt(c) L z  =>  X = Z L' sqrt(c), covariance c L L' = c T
    return scale * (z * llt.matrixL().transpose());
}

MatrixXd toeplitz_design(const DesignConfig& cfg) {
    return sample_design_rows(cfg, cfg.n, rng::StreamId::kDesign);
}

VectorXd sample_responses(const ModelSpec& spec, const MatrixXd& features,
                          const VectorXd& beta_star, uint64_t seed, rng::StreamId stream_id) {
    if (features.cols() != spec.p)
        throw std::invalid_argument("feature dimension does not match spec.p");
    if (beta_star.size() != spec.param_dim())
        throw std::invalid_argument("beta* length does not match spec.param_dim()");
    const int n = static_cast<int>(features.rows());
    rng::Stream stream(seed, stream_id);
    VectorXd y(n);
    switch (spec.kind) {
        case ModelKind::kLinearSquared:
        case ModelKind::kOneHiddenLayer:
            for (int i = 0; i < n; ++i)
                y(i) = predict(spec, features.row(i).transpose().eval(), 0.0, beta_star) +
                       stream.normal();
            return y;
        case ModelKind::kLinearLogistic:
            for (int i = 0; i < n; ++i)
                y(i) = stream.bernoulli(sigmoid(features.row(i).dot(beta_star))) ? 1.0 : 0.0;
            return y;
        case ModelKind::kLinearPoissonSoftplus:
            for (int i = 0; i < n; ++i)
                y(i) = static_cast<double>(
                    stream.poisson(softplus(features.row(i).dot(beta_star))));
            return y;
        case ModelKind::kMulticlassMargin: {
            const int km1 = spec.num_classes - 1;
            Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                           Eigen::RowMajor>>
                weights(beta_star.data(), km1, spec.p);
            VectorXd logits(spec.num_classes), probs(spec.num_classes);
            for (int i = 0; i < n; ++i) {
                logits.head(km1) = weights * features.row(i).transpose();
                logits(km1) = 0.0;  // reference class
                double shift = logits.maxCoeff();
                probs = (logits.array() - shift).exp();
                probs /= probs.sum();
                y(i) = static_cast<double>(stream.categorical(probs) + 1);  // labels 1..K
            }
            return y;
        }
    }
    throw std::logic_error("unknown model kind");
}

void write_dataset_csv(const std::string& path, const Dataset& data,
                       const std::string& metadata_json) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "y";
    for (int j = 0; j < data.p(); ++j) out << ",x" << j;
    out << '\n';
    char buffer[64];
    for (int i = 0; i < data.n(); ++i) {
        std::snprintf(buffer, sizeof(buffer), "%.17g", data.responses(i));
        out << buffer;
        for (int j = 0; j < data.p(); ++j) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", data.features(i, j));
            out << ',' << buffer;
        }
        out << '\n';
    }
    if (!metadata_json.empty()) {
        std::ofstream meta(path + ".meta.json", std::ios::binary);
        if (!meta) throw std::runtime_error("cannot open " + path + ".meta.json for writing");
        meta << metadata_json;
        if (metadata_json.back() != '\n') meta << '\n';
    }
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("y", 0) != 0)
        throw std::runtime_error("missing dataset CSV header in " + path);
    int cols = static_cast<int>(std::count(line.begin(), line.end(), ','));
    std::vector<double> values;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string field;
        int seen = 0;
        while (std::getline(row, field, ',')) {
            values.push_back(std::stod(field));
            ++seen;
        }
        if (seen != cols + 1)
            throw std::runtime_error("ragged dataset CSV row in " + path);
        ++rows;
    }
    Dataset data;
    data.features.resize(rows, cols);
    data.responses.resize(rows);
    for (int i = 0; i < rows; ++i) {
        data.responses(i) = values[static_cast<size_t>(i) * (cols + 1)];
        for (int j = 0; j < cols; ++j)
            data.features(i, j) = values[static_cast<size_t>(i) * (cols + 1) + 1 + j];
    }
    return data;
}

}  // namespace trakbench
