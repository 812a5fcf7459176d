#include "trakbench/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "trakbench/parallel.hpp"
#include "trakbench/rng.hpp"

namespace trakbench {

namespace {

constexpr uint64_t kProjectionSalt = 0x70726f6a;  // distinct per-purpose seeds
constexpr uint64_t kTestSalt = 0x74657374;

std::string format_double(double value, const char* fmt = "%.17g") {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), fmt, value);
    return buffer;
}

std::string trim(const std::string& text) {
    size_t begin = text.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    size_t end = text.find_last_not_of(" \t\r");
    return text.substr(begin, end - begin + 1);
}

std::string estimator_file_tag(const EstimatorKind& kind) {
    std::string tag = kind.name();
    if (kind.is_trak()) tag += "_k" + std::to_string(kind.projection_dim);
    return tag;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (n_list.empty() || p_list.empty()) throw std::invalid_argument("n and p lists must be nonempty");
    for (int n : n_list)
        if (n < 1) throw std::invalid_argument("n must be positive");
    for (int p : p_list)
        if (p < 1) throw std::invalid_argument("p must be positive");
    if (trials < 1) throw std::invalid_argument("trials must be positive");
    if (removed_count < 1) throw std::invalid_argument("removed count must be positive");
    if (test_count < 1) throw std::invalid_argument("test count must be positive");
    if (estimators.empty()) throw std::invalid_argument("estimator list must be nonempty");
    if (model == ModelKind::kOneHiddenLayer)
        throw std::invalid_argument("the synthetic protocol does not cover the network model");
    for (const EstimatorKind& kind : estimators)
        if (kind.is_trak() && kind.projection_dim < 1)
            throw std::invalid_argument("TRAK estimators need a projection dimension");
}

DesignConfig ExperimentConfig::design_config(int n, int p, uint64_t cell_seed) const {
    DesignConfig dcfg;
    dcfg.n = n;
    dcfg.p = p;
    dcfg.num_classes = (model == ModelKind::kMulticlassMargin) ? num_classes : 0;
    dcfg.decay = decay;
    dcfg.seed = cell_seed;
    dcfg.cov_rule = cov_rule;
    return dcfg;
}

ModelSpec ExperimentConfig::model_spec(int p) const {
    switch (model) {
        case ModelKind::kLinearSquared: return ModelSpec::linear_squared(p);
        case ModelKind::kLinearLogistic: return ModelSpec::linear_logistic(p);
        case ModelKind::kLinearPoissonSoftplus: return ModelSpec::linear_poisson_softplus(p);
        case ModelKind::kMulticlassMargin: return ModelSpec::multiclass_margin(p, num_classes);
        case ModelKind::kOneHiddenLayer: break;
    }
    throw std::invalid_argument("unsupported model kind for experiments");
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream stream(text);
    std::string field;
    while (std::getline(stream, field, ',')) {
        field = trim(field);
        if (field.empty()) continue;
        out.push_back(std::stoi(field));
    }
    return out;
}

std::vector<EstimatorKind> parse_estimators(const std::string& names,
                                            const std::vector<int>& k_list) {
    std::vector<EstimatorKind> out;
    std::stringstream stream(names);
    std::string field;
    while (std::getline(stream, field, ',')) {
        field = trim(field);
        if (field.empty()) continue;
        std::transform(field.begin(), field.end(), field.begin(), ::tolower);
        if (field == "true") {
            out.push_back(EstimatorKind::true_loo());
        } else if (field == "linear") {
            out.push_back(EstimatorKind::linear());
        } else if (field == "alo") {
            out.push_back(EstimatorKind::alo());
        } else if (field == "trak" || field == "trak-simplified") {
            if (k_list.empty())
                throw std::invalid_argument("TRAK estimators need k (projection dimensions)");
            for (int k : k_list)
                out.push_back(field == "trak" ? EstimatorKind::trak(k)
                                              : EstimatorKind::trak_simplified(k));
        } else {
            throw std::invalid_argument("unknown estimator: " + field);
        }
    }
    return out;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    ExperimentConfig cfg;
    std::string estimator_names = "true,linear,alo";
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "model") cfg.model = model_kind_from_string(value);
        else if (key == "n") cfg.n_list = parse_int_list(value);
        else if (key == "p") cfg.p_list = parse_int_list(value);
        else if (key == "K") cfg.num_classes = std::stoi(value);
        else if (key == "k") cfg.k_list = parse_int_list(value);
        else if (key == "align_k") cfg.align_k_list = parse_int_list(value);
        else if (key == "trials") cfg.trials = std::stoi(value);
        else if (key == "removed") cfg.removed_count = std::stoi(value);
        else if (key == "tests") cfg.test_count = std::stoi(value);
        else if (key == "estimators") estimator_names = value;
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "out") cfg.out_dir = value;
        else if (key == "decay") cfg.decay = std::stod(value);
        else if (key == "cov_rule") cfg.cov_rule = covariance_rule_from_string(value);
        else if (key == "dependent") cfg.dependent = (value == "1" || value == "true");
        else if (key == "tol_grad") cfg.solver.tol_grad = std::stod(value);
        else if (key == "max_iter") cfg.solver.max_iter = std::stoi(value);
        else if (key == "ridge") cfg.solver.ridge = std::stod(value);
        else if (key == "divergence_guard") cfg.solver.divergence_guard = std::stod(value);
        else if (key == "threads") cfg.threads = std::stoi(value);
        else throw std::runtime_error(path + ": unknown config key '" + key + "'");
    }
    cfg.estimators = parse_estimators(estimator_names, cfg.k_list);
    return cfg;
}

std::vector<int> sample_indices(int n, int count, uint64_t seed) {
    if (count < 0 || count > n)
        throw std::invalid_argument("cannot sample more indices than rows");
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    rng::Stream stream(seed, rng::StreamId::kIndexShuffle);
    for (int j = 0; j < count; ++j) {
        // partial Fisher-Yates: uniform pick from the untouched tail
        int pick = j + static_cast<int>(stream.next_u64() % static_cast<uint64_t>(n - j));
        std::swap(pool[j], pool[pick]);
    }
    std::vector<int> out(pool.begin(), pool.begin() + count);
    std::sort(out.begin(), out.end());
    return out;
}

FittedBatch fit_batch(const ModelSpec& spec, Dataset train, MatrixXd test_features,
                      VectorXd test_labels, std::vector<int> removed,
                      const SolverOptions& solver, uint64_t seed) {
    FittedBatch batch;
    batch.spec = spec;
    batch.train = std::move(train);
    batch.test_features = std::move(test_features);
    batch.test_labels = std::move(test_labels);
    batch.removed = std::move(removed);
    batch.solver_options = solver;
    batch.seed = seed;
    for (int i : batch.removed)
        if (i < 0 || i >= batch.train.n())
            throw std::out_of_range("removed index out of range");

    batch.fit = fit_erm(spec, batch.train, VectorXd::Zero(spec.param_dim()), solver);
    if (!batch.fit.converged) throw SolverError("full-data fit did not converge");
    batch.problem = build_linearized(spec, batch.train, batch.fit);
    batch.brb = fit_linearized(batch.problem, std::nullopt, solver);
    if (!batch.brb.converged) throw SolverError("linearized full fit did not converge");

    batch.test_gradients.resize(batch.test_features.rows(), spec.param_dim());
    VectorXd x(spec.p);
    for (int t = 0; t < batch.test_features.rows(); ++t) {
        x = batch.test_features.row(t);
        batch.test_gradients.row(t) =
            model_gradient(spec, x, batch.test_labels(t), batch.fit.beta).transpose();
    }
    return batch;
}

FittedBatch make_synthetic_batch(const ExperimentConfig& cfg, int n, int p, uint64_t seed) {
    ModelSpec spec = cfg.model_spec(p);
    DesignConfig dcfg = cfg.design_config(n, p, seed);
    VectorXd beta_star = make_true_beta(dcfg);

    Dataset train;
    train.features = toeplitz_design(dcfg);
    train.responses = sample_responses(spec, train.features, beta_star, seed);

    MatrixXd test_features = sample_design_rows(dcfg, cfg.test_count, rng::StreamId::kTestDesign);
    VectorXd test_labels = sample_responses(spec, test_features, beta_star,
                                            rng::derive_seed(seed, kTestSalt),
                                            rng::StreamId::kTestResponses);

    std::vector<int> removed = sample_indices(n, std::min(cfg.removed_count, n), seed);
    FittedBatch batch = fit_batch(spec, std::move(train), std::move(test_features),
                                  std::move(test_labels), std::move(removed), cfg.solver, seed);
    batch.beta_star = beta_star;
    return batch;
}

namespace {

InfluenceTable blank_table(const FittedBatch& batch, const EstimatorKind& kind) {
    InfluenceTable table;
    table.estimator = kind;
    table.meta.n = batch.train.n();
    table.meta.p = batch.train.p();
    table.meta.d = batch.spec.param_dim();
    table.meta.seed = batch.seed;
    table.meta.model = to_string(batch.spec.kind);
    return table;
}

// Fills one estimator's independent grid (and, when `diagonal` is given, the
// z_i = z_new diagonal), turning per-entry failures into breakdown flags.
void fill_tables(const FittedBatch& batch, const EstimatorKind& kind, int threads,
                 InfluenceTable& independent, InfluenceTable* diagonal,
                 std::vector<std::string>& failures) {
    const int tests = static_cast<int>(batch.test_features.rows());
    auto record_failure = [&](int i, int test_id, const std::exception& e) {
        independent.set_breakdown(i, test_id);
        failures.push_back(kind.name() + ": " + e.what());
    };

    auto evaluate_grid = [&](auto&& value_independent, auto&& value_dependent) {
        for (int i : batch.removed) {
            for (int t = 0; t < tests; ++t) {
                try {
                    independent.set(i, t, value_independent(i, t));
                } catch (const LooRefitError& e) {
                    record_failure(i, t, e);
                } catch (const AloBreakdownError& e) {
                    record_failure(i, t, e);
                }
            }
            if (diagonal) {
                try {
                    diagonal->set(i, i, value_dependent(i));
                } catch (const LooRefitError& e) {
                    diagonal->set_breakdown(i, i);
                    failures.push_back(kind.name() + " (dependent): " + std::string(e.what()));
                } catch (const AloBreakdownError& e) {
                    diagonal->set_breakdown(i, i);
                    failures.push_back(kind.name() + " (dependent): " + std::string(e.what()));
                }
            }
        }
    };

    switch (kind.tag) {
        case EstimatorKind::Tag::kTrue: {
            TrueEstimator estimator(batch.spec, batch.train, batch.fit, batch.solver_options);
            estimator.precompute(batch.removed, threads);
            evaluate_grid(
                [&](int i, int t) {
                    return estimator.value(i, batch.test_features.row(t).transpose().eval(),
                                           batch.test_labels(t));
                },
                [&](int i) {
                    return estimator.value(i, batch.train.features.row(i).transpose().eval(),
                                           batch.train.responses(i));
                });
            break;
        }
        case EstimatorKind::Tag::kLinear: {
            LinearEstimator estimator(batch.problem, batch.brb, batch.solver_options);
            estimator.precompute(batch.removed, threads);
            evaluate_grid(
                [&](int i, int t) {
                    return estimator.value(i, batch.test_gradients.row(t).transpose().eval());
                },
                [&](int i) {
                    return estimator.value(
                        i, batch.problem.gradient_rows.row(i).transpose().eval());
                });
            break;
        }
        case EstimatorKind::Tag::kAlo: {
            AloEstimator estimator(batch.problem, batch.brb);
            estimator.precompute(batch.removed);
            evaluate_grid(
                [&](int i, int t) {
                    return estimator.value(i, batch.test_gradients.row(t).transpose().eval());
                },
                [&](int i) {
                    return estimator.value(
                        i, batch.problem.gradient_rows.row(i).transpose().eval());
                });
            break;
        }
        case EstimatorKind::Tag::kTrak:
        case EstimatorKind::Tag::kTrakSimplified: {
            Projection proj = make_projection(batch.spec.param_dim(), kind.projection_dim,
                                              rng::derive_seed(batch.seed, kProjectionSalt));
            TrakEstimator estimator(batch.problem, batch.brb, proj,
                                    kind.tag == EstimatorKind::Tag::kTrakSimplified);
            evaluate_grid(
                [&](int i, int t) {
                    return estimator.value(i, batch.test_gradients.row(t).transpose().eval());
                },
                [&](int i) {
                    return estimator.value(
                        i, batch.problem.gradient_rows.row(i).transpose().eval());
                });
            break;
        }
    }
}

}  // namespace

BatchTables compute_tables(const FittedBatch& batch, const std::vector<EstimatorKind>& estimators,
                           bool dependent, int threads) {
    BatchTables out;
    for (const EstimatorKind& kind : estimators) {
        InfluenceTable independent = blank_table(batch, kind);
        InfluenceTable diagonal = blank_table(batch, kind);
        try {
            fill_tables(batch, kind, threads, independent, dependent ? &diagonal : nullptr,
                        out.failures);
        } catch (const std::exception& e) {
            // a broken estimator (singular Gram, diverged surrogate) leaves
            // its table empty; the others still run
            out.failures.push_back(kind.name() + ": " + e.what());
        }
        out.independent.push_back(std::move(independent));
        if (dependent) out.dependent.push_back(std::move(diagonal));
    }
    return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    ExperimentReport report;
    // series name -> axis value -> pooled magnitude samples
    std::map<std::string, std::map<int, std::vector<double>>> n_series, p_series, k_series;

    for (int trial = 0; trial < cfg.trials; ++trial) {
        uint64_t trial_seed = cfg.trials == 1 ? cfg.seed : rng::derive_seed(cfg.seed, trial);
        for (int n : cfg.n_list) {
            for (int p : cfg.p_list) {
                ExperimentCell cell;
                cell.trial = trial;
                cell.n = n;
                cell.p = p;
                try {
                    FittedBatch batch = make_synthetic_batch(cfg, n, p, trial_seed);
                    cell.fit = batch.fit;
                    cell.brb = batch.brb;
                    cell.anchor_gap = batch.anchor_gap();
                    BatchTables tables =
                        compute_tables(batch, cfg.estimators, cfg.dependent, cfg.threads);
                    cell.failures = tables.failures;

                    // persist tables
                    std::string prefix = cfg.out_dir + "/trial" + std::to_string(trial) + "_n" +
                                         std::to_string(n) + "_p" + std::to_string(p) + "_";
                    for (size_t e = 0; e < cfg.estimators.size(); ++e) {
                        tables.independent[e].write_csv_file(
                            prefix + estimator_file_tag(cfg.estimators[e]) + ".csv");
                        if (cfg.dependent)
                            tables.dependent[e].write_csv_file(
                                prefix + estimator_file_tag(cfg.estimators[e]) +
                                "_dependent.csv");
                    }

                    // pairwise correlations on the independent grid
                    for (size_t a = 0; a < tables.independent.size(); ++a) {
                        for (size_t b = a + 1; b < tables.independent.size(); ++b) {
                            std::vector<double> va, vb;
                            common_values(tables.independent[a], tables.independent[b], va, vb);
                            if (va.size() < 2) continue;
                            PairCorrelation pc;
                            pc.first = estimator_file_tag(cfg.estimators[a]);
                            pc.second = estimator_file_tag(cfg.estimators[b]);
                            pc.pairs = static_cast<int>(va.size());
                            pc.value = pearson(va, vb);
                            cell.correlations.push_back(pc);
                        }
                    }

                    // rank alignment against the exact estimator, when present
                    int ref_index = -1;
                    for (size_t e = 0; e < cfg.estimators.size(); ++e)
                        if (cfg.estimators[e].tag == EstimatorKind::Tag::kTrue)
                            ref_index = static_cast<int>(e);
                    if (ref_index >= 0) {
                        for (size_t e = 0; e < cfg.estimators.size(); ++e) {
                            if (static_cast<int>(e) == ref_index) continue;
                            for (int k : cfg.align_k_list) {
                                if (k > static_cast<int>(batch.removed.size())) continue;
                                for (RankSide side : {RankSide::kTopK, RankSide::kBottomK}) {
                                    try {
                                        RankAlignment alignment = rank_alignment(
                                            tables.independent[ref_index],
                                            tables.independent[e], k, side);
                                        cell.alignments.emplace_back(
                                            estimator_file_tag(cfg.estimators[e]), alignment);
                                    } catch (const std::exception& e2) {
                                        cell.failures.push_back(std::string("alignment: ") +
                                                                e2.what());
                                    }
                                }
                            }
                        }
                    }

                    // magnitude samples for the scaling files
                    auto collect = [&](const std::string& series,
                                       std::map<std::string, std::map<int, std::vector<double>>>&
                                           sink,
                                       int axis_value, const std::vector<double>& samples) {
                        auto& bucket = sink[series][axis_value];
                        bucket.insert(bucket.end(), samples.begin(), samples.end());
                    };
                    auto abs_values = [](const InfluenceTable& t) {
                        std::vector<double> out;
                        for (const auto& [key, entry] : t.entries)
                            if (!entry.breakdown) out.push_back(std::abs(entry.value));
                        return out;
                    };
                    auto abs_diffs = [](const InfluenceTable& ta, const InfluenceTable& tb) {
                        std::vector<double> va, vb, out;
                        common_values(ta, tb, va, vb);
                        out.reserve(va.size());
                        for (size_t j = 0; j < va.size(); ++j)
                            out.push_back(std::abs(va[j] - vb[j]));
                        return out;
                    };
                    auto find_table = [&](EstimatorKind::Tag tag,
                                          int k) -> const InfluenceTable* {
                        for (size_t e = 0; e < cfg.estimators.size(); ++e)
                            if (cfg.estimators[e].tag == tag &&
                                (k == 0 || cfg.estimators[e].projection_dim == k))
                                return &tables.independent[e];
                        return nullptr;
                    };
                    const InfluenceTable* true_table = find_table(EstimatorKind::Tag::kTrue, 0);
                    const InfluenceTable* linear_table =
                        find_table(EstimatorKind::Tag::kLinear, 0);
                    const InfluenceTable* alo_table = find_table(EstimatorKind::Tag::kAlo, 0);
                    for (auto* sink : {&n_series, &p_series}) {
                        int axis_value = (sink == &n_series) ? n : p;
                        // keep the orthogonal dimension fixed at its first value
                        if (sink == &n_series && p != cfg.p_list.front()) continue;
                        if (sink == &p_series && n != cfg.n_list.front()) continue;
                        if (true_table)
                            collect("true_abs", *sink, axis_value, abs_values(*true_table));
                        if (true_table && linear_table)
                            collect("true_minus_linear", *sink, axis_value,
                                    abs_diffs(*true_table, *linear_table));
                        if (linear_table && alo_table)
                            collect("linear_minus_alo", *sink, axis_value,
                                    abs_diffs(*linear_table, *alo_table));
                    }
                    for (size_t e = 0; e < cfg.estimators.size(); ++e) {
                        if (!cfg.estimators[e].is_trak()) continue;
                        collect("trak_abs", k_series, cfg.estimators[e].projection_dim,
                                abs_values(tables.independent[e]));
                        if (cfg.dependent && alo_table) {
                            // ratio TRAK / ALO on the diagonal
                            const InfluenceTable* alo_dep = nullptr;
                            for (size_t a = 0; a < cfg.estimators.size(); ++a)
                                if (cfg.estimators[a].tag == EstimatorKind::Tag::kAlo)
                                    alo_dep = &tables.dependent[a];
                            if (alo_dep) {
                                std::vector<double> vt, va2, ratios;
                                common_values(tables.dependent[e], *alo_dep, vt, va2);
                                for (size_t j = 0; j < vt.size(); ++j)
                                    if (va2[j] != 0.0) ratios.push_back(vt[j] / va2[j]);
                                collect("trak_over_alo", k_series,
                                        cfg.estimators[e].projection_dim, ratios);
                            }
                        }
                    }
                } catch (const std::exception& e) {
                    cell.failures.push_back(std::string("cell failed: ") + e.what());
                }
                report.cells.push_back(std::move(cell));
            }
        }
    }

    // scaling fits where enough axis values accumulated
    auto fit_series = [&](const std::map<std::string, std::map<int, std::vector<double>>>& sink,
                          ScalingAxis axis) {
        for (const auto& [name, buckets] : sink) {
            if (buckets.size() < 3) continue;
            std::vector<std::pair<double, std::vector<double>>> samples;
            for (const auto& [value, mags] : buckets)
                samples.emplace_back(static_cast<double>(value), mags);
            try {
                report.scalings.emplace_back(name + "_vs_" + to_string(axis),
                                             scaling_fit(samples, axis));
            } catch (const std::exception&) {
                // not enough samples or non-positive medians; skip the series
            }
        }
    };
    fit_series(n_series, ScalingAxis::kN);
    fit_series(p_series, ScalingAxis::kP);
    fit_series(k_series, ScalingAxis::kK);

    // alignment.csv
    {
        std::ofstream out(cfg.out_dir + "/alignment.csv", std::ios::binary);
        out << "estimator,side,k,exact_matches,overlap\n";
        for (const ExperimentCell& cell : report.cells)
            for (const auto& [name, alignment] : cell.alignments)
                out << name << ',' << (alignment.side == RankSide::kTopK ? "top" : "bottom")
                    << ',' << alignment.k << ',' << alignment.exact_match_count << ','
                    << format_double(alignment.overlap_ratio) << '\n';
    }
    // scaling_<series>.csv
    for (const auto& [name, fit] : report.scalings) {
        std::ofstream out(cfg.out_dir + "/scaling_" + name + ".csv", std::ios::binary);
        out << "axis,value,median,q1,q3\n";
        for (size_t j = 0; j < fit.raw_values.size(); ++j) {
            out << to_string(fit.axis) << ',' << format_double(fit.raw_values[j]) << ','
                << format_double(fit.raw_medians[j]) << ',' << format_double(fit.q1[j]) << ','
                << format_double(fit.q3[j]) << '\n';
        }
    }
    // summary.txt
    {
        std::ofstream out(cfg.out_dir + "/summary.txt", std::ios::binary);
        out << "# experiment summary\n";
        out << "model = " << to_string(cfg.model) << "\n";
        out << "seed = " << cfg.seed << "\n";
        out << "trials = " << cfg.trials << "\n";
        out << "removed = " << cfg.removed_count << ", tests = " << cfg.test_count << "\n";
        for (const ExperimentCell& cell : report.cells) {
            out << "[cell trial=" << cell.trial << " n=" << cell.n << " p=" << cell.p << "]\n";
            out << "  fit: converged=" << cell.fit.converged
                << " iterations=" << cell.fit.iterations
                << " grad_norm=" << format_double(cell.fit.grad_norm, "%.6g")
                << " objective=" << format_double(cell.fit.objective, "%.10g") << "\n";
            out << "  brb: converged=" << cell.brb.converged
                << " iterations=" << cell.brb.iterations
                << " grad_norm=" << format_double(cell.brb.grad_norm, "%.6g") << "\n";
            out << "  anchor_gap = " << format_double(cell.anchor_gap, "%.6g") << "\n";
            for (const PairCorrelation& pc : cell.correlations)
                out << "  correlation " << pc.first << " " << pc.second << " = "
                    << format_double(pc.value, "%.6f") << " (" << pc.pairs << " pairs)\n";
            for (const auto& [name, alignment] : cell.alignments)
                out << "  alignment True vs " << name << " "
                    << (alignment.side == RankSide::kTopK ? "top" : "bottom")
                    << " k=" << alignment.k << ": exact=" << alignment.exact_match_count
                    << " overlap=" << format_double(alignment.overlap_ratio, "%.6f") << "\n";
            if (cell.failures.empty()) {
                out << "  failures: none\n";
            } else {
                for (const std::string& failure : cell.failures)
                    out << "  failure: " << failure << "\n";
            }
        }
        for (const auto& [name, fit] : report.scalings)
            out << "scaling " << name << ": slope=" << format_double(fit.slope, "%.6f")
                << " intercept=" << format_double(fit.intercept, "%.6f") << "\n";
    }
    return report;
}

}  // namespace trakbench
