#pragma once

// Gradient-based feature attribution for dense networks: plain gradients,
// gradient x input, Integrated Gradients, Expected Gradients and
// DeepLIFT-Rescale, plus global importance and plot-ready exports.

#include "solarxai/data.hpp"
#include "solarxai/network.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace solarxai::attribution {

using autodiff::Matrix;
using autodiff::Vector;
using network::Network;

enum class Method { gradient, gradient_x_input, integrated_gradients, expected_gradients, deeplift };

std::string to_string(Method m);
/// Accepts the long names above and the short forms gradient|gxi|ig|eg|deeplift.
Method method_from_string(const std::string& s);

struct Baseline {
    enum class Kind { zero, fixed, dataset };
    Kind kind = Kind::zero;
    Vector point;        // fixed
    Matrix background;   // dataset: one reference input per row
    int mc_samples = 200;
    std::string label;   // free text recorded in reports

    static Baseline zero();
    static Baseline fixed(Vector point, std::string label = "fixed");
    static Baseline dataset(Matrix background, int mc_samples, std::string label = "dataset");

    /// Point baseline in model space; zero or fixed only.
    Vector resolve(Eigen::Index width) const;
    std::string describe() const;
};

struct MethodParams {
    Baseline baseline = Baseline::zero();
    int steps = 300;                // Integrated Gradients midpoint steps
    std::uint64_t seed = 0;         // Expected Gradients sampling stream
    int steps_per_baseline = 0;     // Expected Gradients: 0 samples alpha, >0 uses a midpoint grid
};

struct AttributionReport {
    Method method = Method::gradient;
    std::string baseline;
    std::vector<std::string> feature_names;
    Vector attributions;
    Vector feature_values;  // the explained input, model space
    double base_value = 0.0;
    double predicted_value = 0.0;
    double completeness_residual = 0.0;

    void finalize_residual() {
        completeness_residual = predicted_value - base_value - attributions.sum();
    }
};

/// Gradients of the network output with respect to each row of `points`
/// (rows are inputs); returns a matrix of the same shape.
Matrix input_gradients(const Network& net, const Matrix& points);

AttributionReport attr_gradient(const Network& net, const Vector& x);
AttributionReport attr_gradient_x_input(const Network& net, const Vector& x);
AttributionReport attr_integrated_gradients(const Network& net, const Vector& x,
                                            const Baseline& baseline, int steps = 300);
AttributionReport attr_expected_gradients(const Network& net, const Vector& x,
                                          const Matrix& background, int mc_samples,
                                          std::uint64_t rng_seed, int steps_per_baseline = 0);
AttributionReport attr_deeplift(const Network& net, const Vector& x, const Baseline& baseline);

/// Dispatches on `method`. Expected Gradients needs a dataset baseline.
AttributionReport explain(const Network& net, const Vector& x, Method method,
                          const MethodParams& params);

/// DeepLIFT for many inputs against one baseline in a single batched pass.
/// Rows of the result are per-sample attributions.
Matrix deeplift_batch(const Network& net, const Matrix& inputs, const Vector& baseline);

/// Per-sample attributions for every row of `inputs`. Expected Gradients
/// uses seed derive_seed(params.seed, row) for row `row`.
Matrix attribute_all(const Network& net, const Matrix& inputs, Method method,
                     const MethodParams& params);

/// Sums member columns into their reporting groups; rows are samples.
Matrix aggregate_groups(const Matrix& per_feature, const std::vector<int>& feature_group,
                        std::size_t group_count);
AttributionReport group_report(const AttributionReport& report, const std::vector<int>& feature_group,
                               const std::vector<std::string>& group_names);

struct Importance {
    std::string feature;
    double value;
};

/// Mean |attribution| per reporting group, sorted descending.
std::vector<Importance> global_importance(const Network& net, const data::Dataset& data,
                                          Method method, const MethodParams& params);
/// Same, from precomputed per-sample attributions.
std::vector<Importance> importance_from(const Matrix& per_feature, const data::Dataset& data);

struct SummaryPoint {
    std::size_t sample_id;
    std::string feature;
    double feature_value;  // raw units
    double attribution;
};

/// One record per (sample, reporting group).
std::vector<SummaryPoint> summary_plot_data(const Network& net, const data::Dataset& data,
                                            Method method, const MethodParams& params);
std::vector<SummaryPoint> summary_from(const Matrix& per_feature, const data::Dataset& data);

struct ForceSegment {
    std::string feature;
    double contribution;
};

struct ForcePlot {
    std::vector<ForceSegment> segments;  // by |contribution|, largest first
    double base_value = 0.0;
    double predicted_value = 0.0;
    double residual = 0.0;
};

ForcePlot force_plot_data(const AttributionReport& report);

nlohmann::ordered_json report_to_json(const AttributionReport& report);
std::string report_to_csv(const AttributionReport& report);
std::string force_plot_csv(const ForcePlot& plot);
std::string summary_csv(const std::vector<SummaryPoint>& points);
std::string importance_csv(const std::vector<Importance>& importance);

/// Spearman rank correlation (average ranks for ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

} // namespace solarxai::attribution
