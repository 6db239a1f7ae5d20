#include "solarxai/pipeline.hpp"

#include "solarxai/attribution.hpp"
#include "solarxai/bayesian.hpp"
#include "solarxai/errors.hpp"
#include "solarxai/io.hpp"
#include "solarxai/network.hpp"
#include "solarxai/random.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

namespace solarxai::pipeline {

using nlohmann::json;

namespace {

std::string fmt(double v, int precision = 4) {
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(precision);
    ss << v;
    return ss.str();
}

data::Task task_of(const std::string& task) {
    if (task == "classify") return data::Task::classification;
    if (task == "regress" || task == "bnn") return data::Task::regression;
    throw UsageError("unknown task '" + task + "' (expected classify, regress or bnn)");
}

json stats_to_json(const std::vector<data::FeatureStats>& stats) {
    json arr = json::array();
    for (const auto& s : stats) {
        arr.push_back({{"feature", s.name}, {"mean", s.mean}, {"std", s.std}});
    }
    return arr;
}

std::vector<data::FeatureStats> stats_from_json(const json& arr) {
    std::vector<data::FeatureStats> out;
    for (const auto& s : arr) {
        out.push_back({s.at("feature").get<std::string>(), s.at("mean").get<double>(),
                       s.at("std").get<double>()});
    }
    return out;
}

struct ModelFile {
    json doc;
    data::Task task = data::Task::regression;
    std::string task_name;
    std::vector<data::FeatureStats> stats;
    double test_fraction = 0.1;
    std::uint64_t split_seed = 0;
    double zmax = 5.0;
};

ModelFile read_model(const fs::path& path) {
    ModelFile m;
    try {
        m.doc = json::parse(io::read_text(path));
        const json& meta = m.doc.at("metadata");
        m.task_name = meta.at("task").get<std::string>();
        m.task = task_of(m.task_name);
        m.stats = stats_from_json(meta.at("normalization"));
        m.test_fraction = meta.at("test_fraction").get<double>();
        m.split_seed = meta.at("split_seed").get<std::uint64_t>();
        m.zmax = meta.at("zmax").get<double>();
    } catch (const json::exception& e) {
        throw DataError("malformed model file " + path.string() + ": " + e.what());
    } catch (const UsageError& e) {
        throw DataError("malformed model file " + path.string() + ": " + e.what());
    }
    return m;
}

std::vector<std::size_t> rows_for(const PreparedData& pd, const std::string& split) {
    if (split == "test") return pd.split.test;
    if (split == "train") return pd.split.train;
    if (split == "all") {
        std::vector<std::size_t> all(pd.records.size());
        for (std::size_t i = 0; i < all.size(); ++i) {
            all[i] = i;
        }
        return all;
    }
    throw UsageError("unknown split '" + split + "' (expected test, train or all)");
}

fs::path or_default(const fs::path& p, const std::string& name) {
    return p.empty() ? default_output_dir() / name : p;
}

} // namespace

fs::path default_output_dir() {
    if (const char* env = std::getenv("SOLARXAI_OUT_DIR"); env && *env) {
        return fs::path(env);
    }
    return fs::path(".");
}

PreparedData load_site_data(const fs::path& csv, double test_fraction, std::uint64_t split_seed,
                            double zmax) {
    auto loaded = data::load_csv(csv);
    if (loaded.records.empty()) {
        throw DataError(csv.string() + ": no usable records");
    }
    PreparedData pd;
    pd.records = data::clean_and_impute(loaded.records, zmax).records;
    pd.split = data::split_indices(pd.records.size(), test_fraction, split_seed);
    return pd;
}

std::string run_synth(const SynthOptions& opt) {
    const auto records = data::generate_synthetic(opt.config);
    const fs::path out = or_default(opt.out, "synthetic.csv");
    data::write_csv(out, records);
    return std::to_string(records.size()) + " records written to " + out.string();
}

std::string run_train(const TrainOptions& opt) {
    if (opt.data.empty()) {
        throw UsageError("--data is required");
    }
    const data::Task task = task_of(opt.task);
    const std::uint64_t split_seed = derive_seed(opt.seed, "split");
    const PreparedData pd = load_site_data(opt.data, opt.test_fraction, split_seed, opt.zmax);
    const data::Dataset all = data::encode_and_normalize(pd.records, task, pd.split.train);
    const data::Dataset train = all.subset(pd.split.train);
    const data::Dataset test = all.subset(pd.split.test);
    if (test.empty()) {
        throw DataError("held-out split is empty; use more data or a larger test fraction");
    }

    network::TrainConfig tc;
    tc.epochs = opt.epochs;
    tc.batch_size = std::min<int>(opt.batch_size, static_cast<int>(train.size()));
    tc.learning_rate = opt.learning_rate;
    tc.rng_seed = derive_seed(opt.seed, "train");

    json model;
    json metrics;
    metrics["task"] = opt.task;
    metrics["n_train"] = train.size();
    metrics["n_test"] = test.size();
    std::string summary;

    if (opt.task == "bnn") {
        bayesian::BnnConfig bc;
        bc.train = tc;
        bc.capacity = opt.capacity;
        bc.prior_std = opt.prior_std;
        bc.kl_weight = opt.kl_weight;
        const auto result = bayesian::train_bnn(train, bc);
        const auto series = bayesian::forecast_series(result.network, test, opt.mc_samples,
                                                      derive_seed(opt.seed, "mc"));
        double se = 0.0, alea = 0.0, epis = 0.0;
        for (const auto& p : series) {
            se += (p.estimate.mean - p.actual) * (p.estimate.mean - p.actual);
            alea += p.estimate.aleatoric_std;
            epis += p.estimate.epistemic_std;
        }
        const double n = static_cast<double>(series.size());
        const double cov = bayesian::coverage(series);
        metrics["rmse"] = std::sqrt(se / n);
        metrics["coverage95"] = cov;
        metrics["mean_aleatoric_std"] = alea / n;
        metrics["mean_epistemic_std"] = epis / n;
        metrics["final_negative_elbo"] = result.elbo_trace.empty() ? 0.0 : result.elbo_trace.back();
        model = result.network.to_json();
        model["feature_names"] = train.feature_names;
        summary = "bnn trained: test RMSE " + fmt(std::sqrt(se / n), 2) + " kWh, 95% coverage " +
                  fmt(cov, 3);
    } else {
        const bool classify = task == data::Task::classification;
        tc.loss = classify ? network::Loss::binary_cross_entropy : network::Loss::mse;
        network::Network net = network::build_network(
            static_cast<int>(train.width()), network::default_hidden(),
            classify ? network::OutputHead::classifier()
                     : network::OutputHead::capacity_scaled(opt.capacity),
            derive_seed(opt.seed, "init"));
        net.set_feature_names(train.feature_names);
        const auto result = network::train(std::move(net), train, tc);
        metrics["final_loss"] = result.loss_trace.empty() ? 0.0 : result.loss_trace.back();
        if (classify) {
            const auto c = network::evaluate_classifier(result.network, test);
            const double positives = train.targets.sum() / static_cast<double>(train.size());
            const double test_pos = test.targets.sum() / static_cast<double>(test.size());
            const double majority = positives > 0.5 ? test_pos : 1.0 - test_pos;
            metrics["accuracy"] = c.accuracy;
            metrics["tp"] = c.tp;
            metrics["tn"] = c.tn;
            metrics["fp"] = c.fp;
            metrics["fn"] = c.fn;
            metrics["majority_baseline"] = majority;
            summary = "classifier trained: test accuracy " + fmt(c.accuracy, 4) +
                      " (majority baseline " + fmt(majority, 4) + ")";
        } else {
            const double rmse = network::evaluate_regressor(result.network, test);
            metrics["rmse"] = rmse;
            metrics["rmse_fraction_of_capacity"] = rmse / opt.capacity;
            metrics["mean_target"] = test.targets.mean();
            summary = "regressor trained: test RMSE " + fmt(rmse, 2) + " kWh";
        }
        model = result.network.to_json();
    }

    model["metadata"] = {{"task", opt.task},
                         {"normalization", stats_to_json(train.normalization)},
                         {"test_fraction", opt.test_fraction},
                         {"split_seed", split_seed},
                         {"zmax", opt.zmax},
                         {"seed", opt.seed}};
    const fs::path out = or_default(opt.out, "model.json");
    fs::path metrics_path = opt.metrics;
    if (metrics_path.empty()) {
        metrics_path = out;
        metrics_path.replace_extension(".metrics.json");
    }
    io::write_text(out, model.dump(1) + "\n");
    io::write_text(metrics_path, metrics.dump(2) + "\n");
    return summary + "; model written to " + out.string();
}

std::string run_explain(const ExplainOptions& opt) {
    using namespace attribution;
    if (opt.model.empty() || opt.data.empty()) {
        throw UsageError("--model and --data are required");
    }
    if (opt.global == opt.sample_id.has_value()) {
        throw UsageError("choose exactly one of --sample-id or --global");
    }
    const Method method = method_from_string(opt.method);
    std::string baseline_kind = opt.baseline;
    if (baseline_kind.empty()) {
        baseline_kind = method == Method::expected_gradients ? "dataset" : "zero";
    }
    if (baseline_kind != "zero" && baseline_kind != "mean" && baseline_kind != "dataset") {
        throw UsageError("unknown baseline '" + baseline_kind + "' (expected zero, mean or dataset)");
    }
    if (method == Method::expected_gradients && baseline_kind != "dataset") {
        throw UsageError("expected-gradients requires dataset background");
    }
    if (method != Method::expected_gradients && baseline_kind == "dataset") {
        throw UsageError("a dataset background is only used by expected-gradients");
    }
    if ((method == Method::gradient || method == Method::gradient_x_input) && baseline_kind != "zero") {
        throw UsageError("gradient and gxi are taken against the zero baseline");
    }

    const ModelFile mf = read_model(opt.model);
    if (mf.task_name == "bnn") {
        throw DataError("explain needs a deterministic model; this file holds a Bayesian network");
    }
    const network::Network net = network::Network::from_json(mf.doc);
    const PreparedData pd = load_site_data(opt.data, mf.test_fraction, mf.split_seed, mf.zmax);
    const data::Dataset all = data::encode_with(pd.records, mf.task, mf.stats);
    if (all.width() != net.input_width()) {
        throw DataError("data width does not match the model");
    }
    const data::Dataset background = all.subset(pd.split.train);
    const data::Dataset target = all.subset(rows_for(pd, opt.split));

    MethodParams params;
    params.steps = opt.steps;
    params.seed = derive_seed(opt.seed, "eg");
    if (baseline_kind == "zero") {
        // Every raw feature set to zero, expressed in model space.
        data::RawRecord zero;
        zero.index = -1;
        params.baseline = Baseline::fixed(data::encode_row(zero, mf.task, mf.stats), "zero");
    } else if (baseline_kind == "mean") {
        params.baseline = Baseline::fixed(background.features.colwise().mean().transpose(), "mean");
    } else {
        params.baseline = Baseline::dataset(background.features, opt.mc_samples, "dataset");
    }

    const fs::path dir = opt.out_dir.empty() ? default_output_dir() : opt.out_dir;
    const std::string stem = to_string(method);

    if (opt.global) {
        if (target.empty()) {
            throw DataError("selected split is empty");
        }
        const Matrix attr = attribute_all(net, target.features, method, params);
        const Vector pred = net.predict_batch(target.features);
        double base = 0.0;
        if (method == Method::expected_gradients) {
            base = net.predict_batch(background.features).mean();
        } else {
            base = net.predict(params.baseline.resolve(net.input_width()));
        }
        double max_rel = 0.0, max_abs = 0.0;
        for (Eigen::Index i = 0; i < attr.rows(); ++i) {
            const double delta = pred(i) - base;
            const double r = std::abs(delta - attr.row(i).sum());
            max_abs = std::max(max_abs, r);
            max_rel = std::max(max_rel, r / std::max(1.0, std::abs(delta)));
        }
        const auto importance = importance_from(attr, target);
        io::write_text(dir / (stem + "_importance.csv"), importance_csv(importance));
        io::write_text(dir / (stem + "_summary.csv"), summary_csv(summary_from(attr, target)));
        nlohmann::ordered_json j;
        j["method"] = stem;
        j["baseline"] = params.baseline.describe();
        j["split"] = opt.split;
        j["n_samples"] = target.size();
        j["base_value"] = base;
        j["max_abs_completeness_residual"] = max_abs;
        j["max_relative_completeness_residual"] = max_rel;
        nlohmann::ordered_json imp = nlohmann::ordered_json::array();
        for (const auto& i : importance) {
            imp.push_back({{"feature", i.feature}, {"importance", i.value}});
        }
        j["importance"] = imp;
        io::write_text(dir / (stem + "_global.json"), j.dump(2) + "\n");
        return "global " + stem + " importance over " + std::to_string(target.size()) +
               " samples written to " + (dir / (stem + "_importance.csv")).string() +
               "; top feature " + importance.front().feature;
    }

    const long id = *opt.sample_id;
    if (id < 0 || id >= target.size()) {
        throw UsageError("--sample-id " + std::to_string(id) + " is outside the " + opt.split +
                         " split (size " + std::to_string(target.size()) + ")");
    }
    const Vector x = target.features.row(id).transpose();
    const AttributionReport raw = explain(net, x, method, params);
    const AttributionReport grouped = group_report(raw, target.feature_group, target.group_names);
    nlohmann::ordered_json j = report_to_json(grouped);
    j["sample_id"] = id;
    j["split"] = opt.split;
    if (!target.timestamps.empty()) {
        j["timestamp"] = target.timestamps[static_cast<std::size_t>(id)];
    }
    std::vector<double> raw_values;
    for (Eigen::Index k = 0; k < target.group_raw.cols(); ++k) {
        raw_values.push_back(target.group_raw(id, k));
    }
    j["feature_values"] = raw_values;
    j["feature_attributions"] =
        std::vector<double>(raw.attributions.data(), raw.attributions.data() + raw.attributions.size());
    j["real_value"] = target.actual_pv.size() ? target.actual_pv(id) : target.targets(id);
    if (mf.task == data::Task::regression && target.predicted_load.size()) {
        j["predicted_load"] = target.predicted_load(id);
        j["predicted_exceedance"] =
            network::exceedance_from_regression(grouped.predicted_value, target.predicted_load(id));
    } else {
        j["predicted_label"] = network::classify(grouped.predicted_value);
        j["true_label"] = static_cast<int>(target.targets(id));
    }
    const std::string tag = stem + "_sample" + std::to_string(id);
    io::write_text(dir / (tag + "_report.json"), j.dump(2) + "\n");
    io::write_text(dir / (tag + "_report.csv"), report_to_csv(grouped));
    io::write_text(dir / (tag + "_force.csv"), force_plot_csv(force_plot_data(grouped)));
    return stem + " sample " + std::to_string(id) + ": predicted " + fmt(grouped.predicted_value) +
           ", base " + fmt(grouped.base_value) + ", residual " +
           io::format_double(grouped.completeness_residual) + "; report written to " +
           (dir / (tag + "_report.json")).string();
}

std::string run_uncertainty(const UncertaintyOptions& opt) {
    if (opt.model.empty() || opt.data.empty()) {
        throw UsageError("--model and --data are required");
    }
    if (opt.mc_samples < 2) {
        throw UsageError("--mc-samples must be at least 2 (std undefined)");
    }
    const ModelFile mf = read_model(opt.model);
    const bayesian::VariationalNetwork bnn = bayesian::VariationalNetwork::from_json(mf.doc);
    const PreparedData pd = load_site_data(opt.data, mf.test_fraction, mf.split_seed, mf.zmax);
    const data::Dataset all = data::encode_with(pd.records, mf.task, mf.stats);
    if (all.width() != bnn.input_width()) {
        throw DataError("data width does not match the model");
    }
    const data::Dataset target = all.subset(rows_for(pd, opt.split));
    const auto series = bayesian::forecast_series(bnn, target, opt.mc_samples,
                                                  derive_seed(opt.seed, "mc"), opt.flag_quantile);
    const fs::path out = or_default(opt.out, "forecast.csv");
    io::write_text(out, bayesian::forecast_csv(series));
    return "coverage " + fmt(bayesian::coverage(series), 4) + " of " + std::to_string(series.size()) +
           " actuals inside the 95% band; series written to " + out.string();
}

} // namespace solarxai::pipeline
