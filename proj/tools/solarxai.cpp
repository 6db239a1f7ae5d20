// solarxai: synthetic data, training, attribution and uncertainty from the
// command line. Exit codes: 0 success, 2 usage, 3 data, 4 numeric failure.

#include "solarxai/errors.hpp"
#include "solarxai/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

// Reads flat key=value files and attaches every key to the subcommand given
// on the command line, so config keys are the flag names without dashes.
class FlatConfig : public CLI::ConfigTOML {
public:
    explicit FlatConfig(std::string subcommand) : subcommand_(std::move(subcommand)) {}

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        auto items = CLI::ConfigTOML::from_config(input);
        for (auto& item : items) {
            if (item.parents.empty() && !subcommand_.empty()) {
                item.parents = {subcommand_};
            }
        }
        return items;
    }

private:
    std::string subcommand_;
};

std::string find_subcommand(int argc, char** argv, const std::vector<std::string>& names) {
    for (int i = 1; i < argc; ++i) {
        if (std::find(names.begin(), names.end(), argv[i]) != names.end()) {
            return argv[i];
        }
    }
    return {};
}

} // namespace

int main(int argc, char** argv) {
    using namespace solarxai;

    CLI::App app{"Explainable PV and load forecasting"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value file with the same keys as the flags");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.config_formatter(std::make_shared<FlatConfig>(
        find_subcommand(argc, argv, {"synth", "train", "explain", "uncertainty"})));

    app.fallthrough();
    app.option_defaults()->always_capture_default();

    pipeline::SynthOptions synth;
    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic hourly site dataset");
    cmd_synth->add_option("--days", synth.config.days, "number of days (12 records each)")
        ->check(CLI::PositiveNumber);
    cmd_synth->add_option("--capacity", synth.config.capacity, "PV capacity, kWh per hour");
    cmd_synth->add_option("--cloud-prob", synth.config.cloud_prob, "per-hour cloud event probability")
        ->check(CLI::Range(0.0, 1.0));
    cmd_synth->add_option("--noise", synth.config.noise, "noise multiplier (0 = noiseless)");
    cmd_synth->add_option("--seed", synth.config.seed);
    cmd_synth->add_option("--start", synth.config.start_date, "first day, YYYY-MM-DD");
    cmd_synth->add_option("--out", synth.out, "output CSV")->default_str("");
    synth.out.clear();

    pipeline::TrainOptions train;
    auto* cmd_train = app.add_subcommand("train", "train a classifier, regressor or Bayesian network");
    cmd_train->add_option("--task", train.task)->check(CLI::IsMember({"classify", "regress", "bnn"}));
    cmd_train->add_option("--data", train.data, "site CSV")->required();
    cmd_train->add_option("--out", train.out, "model JSON");
    cmd_train->add_option("--metrics", train.metrics, "metrics JSON");
    cmd_train->add_option("--seed", train.seed);
    cmd_train->add_option("--epochs", train.epochs)->check(CLI::NonNegativeNumber);
    cmd_train->add_option("--batch-size", train.batch_size)->check(CLI::PositiveNumber);
    cmd_train->add_option("--learning-rate", train.learning_rate);
    cmd_train->add_option("--capacity", train.capacity);
    cmd_train->add_option("--test-fraction", train.test_fraction);
    cmd_train->add_option("--zmax", train.zmax, "outlier z-score threshold");
    cmd_train->add_option("--prior-std", train.prior_std, "bnn weight prior std");
    double kl_weight = -1.0;
    cmd_train->add_option("--kl-weight", kl_weight, "bnn KL weight (default 1/number of batches)")->default_str("");
    cmd_train->add_option("--mc-samples", train.mc_samples, "bnn evaluation draws");

    pipeline::ExplainOptions explain;
    long sample_id = -1;
    auto* cmd_explain = app.add_subcommand("explain", "attribute predictions to input features");
    cmd_explain->add_option("--model", explain.model)->required();
    cmd_explain->add_option("--data", explain.data)->required();
    cmd_explain->add_option("--method", explain.method)
        ->check(CLI::IsMember({"gradient", "gxi", "ig", "eg", "deeplift"}));
    cmd_explain->add_option("--baseline", explain.baseline)
        ->check(CLI::IsMember({"zero", "mean", "dataset"}));
    auto* opt_sample = cmd_explain->add_option("--sample-id", sample_id, "row within the split");
    auto* opt_global = cmd_explain->add_flag("--global", explain.global, "importance over the split");
    opt_sample->excludes(opt_global);
    cmd_explain->add_option("--split", explain.split)->check(CLI::IsMember({"test", "train", "all"}));
    cmd_explain->add_option("--steps", explain.steps, "integrated gradients steps")
        ->check(CLI::PositiveNumber);
    cmd_explain->add_option("--mc-samples", explain.mc_samples, "expected gradients draws")
        ->check(CLI::PositiveNumber);
    cmd_explain->add_option("--seed", explain.seed);
    cmd_explain->add_option("--out-dir", explain.out_dir);

    pipeline::UncertaintyOptions unc;
    auto* cmd_unc = app.add_subcommand("uncertainty", "probabilistic forecast from a Bayesian model");
    cmd_unc->add_option("--model", unc.model)->required();
    cmd_unc->add_option("--data", unc.data)->required();
    cmd_unc->add_option("--mc-samples", unc.mc_samples);
    cmd_unc->add_option("--split", unc.split)->check(CLI::IsMember({"test", "train", "all"}));
    cmd_unc->add_option("--flag-quantile", unc.flag_quantile)->check(CLI::Range(0.0, 1.0));
    cmd_unc->add_option("--seed", unc.seed);
    cmd_unc->add_option("--out", unc.out, "forecast CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        std::string line;
        if (*cmd_synth) {
            line = pipeline::run_synth(synth);
        } else if (*cmd_train) {
            if (kl_weight >= 0.0) {
                train.kl_weight = kl_weight;
            }
            line = pipeline::run_train(train);
        } else if (*cmd_explain) {
            if (*opt_sample) {
                explain.sample_id = sample_id;
            }
            line = pipeline::run_explain(explain);
        } else if (*cmd_unc) {
            line = pipeline::run_uncertainty(unc);
        }
        std::cout << line << '\n';
        return kOk;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
}
