#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "trakbench/harness.hpp"
#include "trakbench/ingest.hpp"
#include "trakbench/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace trakbench;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string estimator_names;
    std::string k_values;
    uint64_t seed = 0;
    bool seed_set = false;
};

ExperimentConfig resolve_config(const CommonFlags& flags) {
    ExperimentConfig cfg;
    if (!flags.config_path.empty()) cfg = load_config(flags.config_path);
    if (flags.seed_set) cfg.seed = flags.seed;
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (!flags.k_values.empty()) cfg.k_list = parse_int_list(flags.k_values);
    if (!flags.estimator_names.empty())
        cfg.estimators = parse_estimators(flags.estimator_names, cfg.k_list);
    if (cfg.estimators.empty())
        cfg.estimators = parse_estimators("true,linear,alo", cfg.k_list);
    return cfg;
}

json dataset_metadata(const ExperimentConfig& cfg, int n, int p, uint64_t seed) {
    json meta;
    meta["model"] = to_string(cfg.model);
    meta["n"] = n;
    meta["p"] = p;
    if (cfg.model == ModelKind::kMulticlassMargin) meta["K"] = cfg.num_classes;
    meta["decay"] = cfg.decay;
    meta["cov_rule"] = to_string(cfg.cov_rule);
    meta["beta_norm_rule"] = "norm-sq-equals-p";
    meta["seed"] = seed;
    return meta;
}

int run_simulate(const CommonFlags& flags, bool write_data) {
    ExperimentConfig cfg = resolve_config(flags);
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    if (write_data) {
        for (int trial = 0; trial < cfg.trials; ++trial) {
            uint64_t trial_seed =
                cfg.trials == 1 ? cfg.seed : rng::derive_seed(cfg.seed, trial);
            for (int n : cfg.n_list) {
                for (int p : cfg.p_list) {
                    ModelSpec spec = cfg.model_spec(p);
                    DesignConfig dcfg = cfg.design_config(n, p, trial_seed);
                    VectorXd beta_star = make_true_beta(dcfg);
                    Dataset data;
                    data.features = toeplitz_design(dcfg);
                    data.responses = sample_responses(spec, data.features, beta_star, trial_seed);
                    std::string path = cfg.out_dir + "/trial" + std::to_string(trial) + "_n" +
                                       std::to_string(n) + "_p" + std::to_string(p) +
                                       "_data.csv";
                    write_dataset_csv(path, data,
                                      dataset_metadata(cfg, n, p, trial_seed).dump(2));
                }
            }
        }
    }
    ExperimentReport report = run_experiment(cfg);
    int failures = 0;
    for (const ExperimentCell& cell : report.cells)
        failures += static_cast<int>(cell.failures.size());
    std::cout << "wrote " << cfg.out_dir << " (" << report.cells.size() << " cells, "
              << failures << " recorded failures)\n";
    return 0;
}

int run_ingest(const std::vector<std::string>& train_files,
               const std::vector<std::string>& test_files, const std::string& out_dir,
               const std::string& classes) {
    fs::create_directories(out_dir);
    auto load = [](const std::vector<std::string>& files) {
        std::vector<ImageRecord> records;
        for (const std::string& file : files) {
            std::vector<ImageRecord> part = read_cifar_binary(file);
            records.insert(records.end(), part.begin(), part.end());
        }
        return records;
    };
    std::vector<ImageRecord> train = load(train_files);
    std::vector<ImageRecord> test = load(test_files);
    int class_a = -1, class_b = -1;
    if (!classes.empty()) {
        std::vector<int> pair = parse_int_list(classes);
        if (pair.size() != 2) throw std::runtime_error("--classes expects two class indices");
        class_a = pair[0];
        class_b = pair[1];
        train = binary_subset(train, class_a, class_b);
        if (!test.empty()) test = binary_subset(test, class_a, class_b);
    }

    PooledFeatures pooled_train = pool_and_standardize(train);
    json meta;
    meta["source"] = "cifar-binary";
    meta["pooling"] = "4x4 average, pool-first then channel-wise standardization";
    meta["byte_scale"] = "1/255";
    meta["feature_dim"] = kCifarFeatureDim;
    if (class_a >= 0) meta["binary_classes"] = {class_a, class_b};
    for (int c = 0; c < kCifarChannels; ++c) {
        meta["channel_mean"][c] = pooled_train.stats.mean[c];
        meta["channel_std"][c] = pooled_train.stats.stddev[c];
    }
    meta["stats_from"] = "training partition";

    Dataset train_data{pooled_train.features, pooled_train.labels};
    write_dataset_csv(out_dir + "/train.csv", train_data, meta.dump(2));
    if (!test.empty()) {
        PooledFeatures pooled_test = pool_and_standardize(test, pooled_train.stats);
        Dataset test_data{pooled_test.features, pooled_test.labels};
        write_dataset_csv(out_dir + "/test.csv", test_data, meta.dump(2));
    }
    std::cout << "wrote " << out_dir << "/train.csv (" << train_data.n() << " rows)";
    if (!test.empty()) std::cout << " and test.csv (" << test.size() << " rows)";
    std::cout << "\n";
    return 0;
}

int run_influence(const CommonFlags& flags, const std::string& data_path,
                  const std::string& test_path, const std::string& model_name, int num_classes,
                  int removed_count, int test_count, bool dependent) {
    ExperimentConfig cfg = resolve_config(flags);
    cfg.model = model_kind_from_string(model_name);
    cfg.num_classes = num_classes;
    fs::create_directories(cfg.out_dir);

    Dataset train = read_dataset_csv(data_path);
    if (cfg.model == ModelKind::kMulticlassMargin) {
        // CSV labels may be 0-based; shift once when a 0 is present
        if (train.responses.minCoeff() == 0.0)
            train.responses.array() += 1.0;
    }
    ModelSpec spec = cfg.model_spec(train.p());
    MatrixXd test_features;
    VectorXd test_labels;
    if (!test_path.empty()) {
        Dataset test = read_dataset_csv(test_path);
        if (cfg.model == ModelKind::kMulticlassMargin && test.responses.minCoeff() == 0.0)
            test.responses.array() += 1.0;
        std::vector<int> picks =
            sample_indices(test.n(), std::min(test_count, test.n()),
                           rng::derive_seed(cfg.seed, 0x7472616b));
        test_features.resize(picks.size(), test.p());
        test_labels.resize(picks.size());
        for (size_t j = 0; j < picks.size(); ++j) {
            test_features.row(j) = test.features.row(picks[j]);
            test_labels(j) = test.responses(picks[j]);
        }
    } else {
        // fall back to self-evaluation on held-out training rows
        std::vector<int> picks = sample_indices(train.n(), std::min(test_count, train.n()),
                                                rng::derive_seed(cfg.seed, 0x7472616b));
        test_features.resize(picks.size(), train.p());
        test_labels.resize(picks.size());
        for (size_t j = 0; j < picks.size(); ++j) {
            test_features.row(j) = train.features.row(picks[j]);
            test_labels(j) = train.responses(picks[j]);
        }
    }

    std::vector<int> removed =
        sample_indices(train.n(), std::min(removed_count, train.n()), cfg.seed);
    FittedBatch batch = fit_batch(spec, std::move(train), std::move(test_features),
                                  std::move(test_labels), std::move(removed), cfg.solver,
                                  cfg.seed);
    BatchTables tables = compute_tables(batch, cfg.estimators, dependent, cfg.threads);
    for (size_t e = 0; e < cfg.estimators.size(); ++e) {
        std::string tag = cfg.estimators[e].name();
        if (cfg.estimators[e].is_trak())
            tag += "_k" + std::to_string(cfg.estimators[e].projection_dim);
        tables.independent[e].write_csv_file(cfg.out_dir + "/" + tag + ".csv");
        if (dependent)
            tables.dependent[e].write_csv_file(cfg.out_dir + "/" + tag + "_dependent.csv");
    }
    std::cout << "fit: converged=" << batch.fit.converged
              << " iterations=" << batch.fit.iterations << "\n";
    for (const std::string& failure : tables.failures)
        std::cout << "failure: " << failure << "\n";
    std::cout << "wrote " << cfg.estimators.size() << " tables to " << cfg.out_dir << "\n";
    return 0;
}

int run_report(const std::string& reference_path, const std::vector<std::string>& candidates,
               const std::string& k_values, const std::string& out_dir) {
    fs::create_directories(out_dir);
    InfluenceTable reference = InfluenceTable::read_csv_file(reference_path);
    std::vector<int> ks = k_values.empty() ? std::vector<int>{1, 3, 5, 10, 20, 50}
                                           : parse_int_list(k_values);
    std::ofstream alignment_out(out_dir + "/alignment.csv", std::ios::binary);
    alignment_out << "estimator,side,k,exact_matches,overlap\n";
    std::ofstream summary(out_dir + "/report.txt", std::ios::binary);
    for (const std::string& path : candidates) {
        InfluenceTable candidate = InfluenceTable::read_csv_file(path);
        std::vector<double> va, vb;
        common_values(reference, candidate, va, vb);
        std::string name = candidate.estimator.name();
        if (candidate.estimator.is_trak())
            name += "_k" + std::to_string(candidate.estimator.projection_dim);
        if (va.size() >= 2) {
            char buffer[64];
            std::snprintf(buffer, sizeof(buffer), "%.6f", pearson(va, vb));
            summary << "correlation " << reference.estimator.name() << " vs " << name << " = "
                    << buffer << " (" << va.size() << " pairs)\n";
        }
        for (int k : ks) {
            for (RankSide side : {RankSide::kTopK, RankSide::kBottomK}) {
                try {
                    RankAlignment alignment = rank_alignment(reference, candidate, k, side);
                    char buffer[64];
                    std::snprintf(buffer, sizeof(buffer), "%.17g", alignment.overlap_ratio);
                    alignment_out << name << ','
                                  << (side == RankSide::kTopK ? "top" : "bottom") << ',' << k
                                  << ',' << alignment.exact_match_count << ',' << buffer
                                  << '\n';
                } catch (const std::exception& e) {
                    summary << "alignment " << name << " k=" << k << " failed: " << e.what()
                            << "\n";
                }
            }
        }
    }
    std::cout << "wrote " << out_dir << "/alignment.csv and report.txt\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Leave-one-out influence and TRAK-style approximations"};
    app.require_subcommand(1);

    CommonFlags flags;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", flags.config_path, "experiment config file (key = value)");
        cmd->add_option("--seed", flags.seed, "master seed")->each([&](const std::string&) {
            flags.seed_set = true;
        });
        cmd->add_option("--out", flags.out_dir, "output directory");
        cmd->add_option("--estimators", flags.estimator_names,
                        "comma list: true,linear,alo,trak,trak-simplified");
        cmd->add_option("--k", flags.k_values, "comma list of projection dimensions");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "run the synthetic protocol");
    add_common(simulate);
    bool write_data = false;
    simulate->add_flag("--write-data", write_data, "also write the generated dataset CSVs");

    CLI::App* ingest = app.add_subcommand("ingest", "pool and standardize CIFAR binaries");
    std::vector<std::string> train_files, test_files;
    std::string ingest_out = "out", classes;
    ingest->add_option("--train", train_files, "training batch files")->required();
    ingest->add_option("--test", test_files, "test batch files");
    ingest->add_option("--out", ingest_out, "output directory");
    ingest->add_option("--classes", classes, "two class indices for a binary subset (a,b)");

    CLI::App* influence = app.add_subcommand("influence", "estimator run on one dataset");
    add_common(influence);
    std::string data_path, test_path, model_name = "logistic";
    int num_classes = 3, removed_count = 100, test_count = 10;
    bool dependent = false;
    influence->add_option("--data", data_path, "training dataset CSV")->required();
    influence->add_option("--test-data", test_path, "test dataset CSV");
    influence->add_option("--model", model_name, "squared|logistic|poisson|multiclass");
    influence->add_option("--K", num_classes, "class count for multiclass");
    influence->add_option("--removed", removed_count, "training points to remove");
    influence->add_option("--tests", test_count, "test points to evaluate");
    influence->add_flag("--dependent", dependent, "also evaluate the z_i = z_new diagonal");

    CLI::App* report = app.add_subcommand("report", "metrics from existing tables");
    std::string reference_path, report_k, report_out = "out";
    std::vector<std::string> candidate_paths;
    report->add_option("--reference", reference_path, "reference influence CSV")->required();
    report->add_option("--candidates", candidate_paths, "candidate influence CSVs")->required();
    report->add_option("--k", report_k, "alignment list sizes");
    report->add_option("--out", report_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return run_simulate(flags, write_data);
        if (ingest->parsed()) return run_ingest(train_files, test_files, ingest_out, classes);
        if (influence->parsed())
            return run_influence(flags, data_path, test_path, model_name, num_classes,
                                 removed_count, test_count, dependent);
        if (report->parsed())
            return run_report(reference_path, candidate_paths, report_k, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
