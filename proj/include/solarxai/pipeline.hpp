#pragma once

// End-to-end commands behind the solarxai CLI. Every command reads and
// writes files; the returned string is the one-line stdout summary.

#include "solarxai/data.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace solarxai::pipeline {

namespace fs = std::filesystem;

/// Directory used when an output path is not given: $SOLARXAI_OUT_DIR or ".".
fs::path default_output_dir();

struct SynthOptions {
    data::SynthConfig config;
    fs::path out = "synthetic.csv";
};

std::string run_synth(const SynthOptions& opt);

struct TrainOptions {
    std::string task = "classify";  // classify | regress | bnn
    fs::path data;
    fs::path out;                    // model JSON
    fs::path metrics;                // defaults to <out stem>.metrics.json
    std::uint64_t seed = 0;
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double capacity = data::kDefaultCapacity;
    double test_fraction = 0.1;
    double zmax = 5.0;
    // bnn only
    double prior_std = 1.0;
    std::optional<double> kl_weight;
    int mc_samples = 200;            // evaluation draws for the metrics file
};

std::string run_train(const TrainOptions& opt);

struct ExplainOptions {
    fs::path model;
    fs::path data;
    std::string method = "deeplift";     // gradient | gxi | ig | eg | deeplift
    std::string baseline;                // zero | mean | dataset; empty picks per method
    std::optional<long> sample_id;       // local mode
    bool global = false;
    std::string split = "test";          // test | train | all
    int steps = 300;
    int mc_samples = 200;
    std::uint64_t seed = 0;
    fs::path out_dir;
};

std::string run_explain(const ExplainOptions& opt);

struct UncertaintyOptions {
    fs::path model;
    fs::path data;
    int mc_samples = 200;
    std::string split = "test";
    double flag_quantile = 0.9;
    std::uint64_t seed = 0;
    fs::path out;
};

std::string run_uncertainty(const UncertaintyOptions& opt);

/// Loaded and cleaned site data plus the split stored with a model.
struct PreparedData {
    std::vector<data::RawRecord> records;
    data::SplitIndices split;
};

PreparedData load_site_data(const fs::path& csv, double test_fraction, std::uint64_t split_seed,
                            double zmax);

} // namespace solarxai::pipeline
