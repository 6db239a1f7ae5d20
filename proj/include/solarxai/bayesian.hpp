#pragma once

// Mean-field variational regression network. Each weight has a Gaussian
// posterior N(mean, softplus(rho)^2); the output layer emits a predictive
// mean (capacity-bounded) and a predictive standard deviation.
//
// Aleatoric uncertainty is the predicted output std, epistemic uncertainty
// the spread of the predicted mean across Monte Carlo weight draws.

#include "solarxai/data.hpp"
#include "solarxai/network.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace solarxai::bayesian {

using autodiff::Matrix;
using autodiff::Vector;
using network::Activation;

struct VariationalLayer {
    Matrix weight_mean;  // out x in
    Matrix weight_rho;
    Vector bias_mean;
    Vector bias_rho;
    Activation activation = Activation::relu;
};

/// One concrete draw of every weight.
struct WeightSample {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

struct PointPrediction {
    Vector mean;   // kWh per row
    Vector sigma;  // kWh per row
};

class VariationalNetwork {
public:
    VariationalNetwork() = default;
    /// The last layer must have two identity units: row 0 drives the mean,
    /// row 1 the std. With `fixed_sigma` the std head is ignored and the
    /// predictive std is that constant.
    VariationalNetwork(int input_width, std::vector<VariationalLayer> layers, double capacity,
                       double prior_std, std::optional<double> fixed_sigma = std::nullopt,
                       std::vector<std::string> feature_names = {});

    int input_width() const noexcept { return input_width_; }
    double capacity() const noexcept { return capacity_; }
    double prior_std() const noexcept { return prior_std_; }
    const std::optional<double>& fixed_sigma() const noexcept { return fixed_sigma_; }
    const std::vector<VariationalLayer>& layers() const noexcept { return layers_; }
    std::vector<VariationalLayer>& mutable_layers() noexcept { return layers_; }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

    /// Draws weights in a fixed order (layer by layer, weights row-major,
    /// then biases).
    WeightSample sample(std::uint64_t seed) const;
    WeightSample mean_weights() const;
    PointPrediction predict(const WeightSample& w, const Matrix& rows) const;

    /// Sets every rho so that all posterior stds are exactly zero.
    void collapse_posterior();

    nlohmann::json to_json() const;
    static VariationalNetwork from_json(const nlohmann::json& j);

    /// Predictive std in units of capacity is softplus(z) + kSigmaFloor.
    static constexpr double kSigmaFloor = 1e-4;

private:
    int input_width_ = 0;
    std::vector<VariationalLayer> layers_;
    double capacity_ = data::kDefaultCapacity;
    double prior_std_ = 1.0;
    std::optional<double> fixed_sigma_;
    std::vector<std::string> feature_names_;
};

struct BnnConfig {
    network::TrainConfig train;          // loss field unused
    std::vector<network::LayerSpec> hidden = network::default_hidden();
    double capacity = data::kDefaultCapacity;
    double prior_std = 1.0;
    std::optional<double> kl_weight;     // default 1 / number of batches
    int mc_train_samples = 1;
    double initial_rho = -6.0;
    std::optional<double> fixed_sigma;   // kWh
};

struct BnnTrainResult {
    VariationalNetwork network;
    std::vector<double> elbo_trace;  // negative ELBO per training sample, per epoch
};

VariationalNetwork init_bnn(int input_width, const BnnConfig& cfg);
BnnTrainResult train_bnn(const data::Dataset& data, const BnnConfig& cfg);
/// Continues training an existing network.
BnnTrainResult train_bnn(VariationalNetwork net, const data::Dataset& data, const BnnConfig& cfg);

struct UncertaintyEstimate {
    double mean = 0.0;
    double aleatoric_std = 0.0;
    double epistemic_std = 0.0;
    double total_std = 0.0;
    double lower95 = 0.0;
    double upper95 = 0.0;
};

inline constexpr double kBand95 = 1.96;
inline constexpr int kDefaultMcSamples = 200;

/// One estimate per row. Draw s uses seed derive_seed(rng_seed, s) for every
/// row, so a row's estimate does not depend on the other rows.
std::vector<UncertaintyEstimate> predict_uncertainty_batch(const VariationalNetwork& bnn,
                                                           const Matrix& rows, int mc_samples,
                                                           std::uint64_t rng_seed);
UncertaintyEstimate predict_uncertainty(const VariationalNetwork& bnn, const Vector& x,
                                        int mc_samples, std::uint64_t rng_seed);

struct ForecastPoint {
    std::string timestamp;
    UncertaintyEstimate estimate;
    double actual = 0.0;
    bool high_uncertainty = false;
};

/// Samples must be in time order. A point is flagged when its total std is
/// strictly above the `flag_quantile` quantile of the series.
std::vector<ForecastPoint> forecast_series(const VariationalNetwork& bnn, const data::Dataset& samples,
                                           int mc_samples, std::uint64_t rng_seed,
                                           double flag_quantile = 0.9);

/// Fraction of actuals inside [lower95, upper95].
double coverage(const std::vector<ForecastPoint>& series);
std::string forecast_csv(const std::vector<ForecastPoint>& series);

/// Linear-interpolated sample quantile (type 7).
double quantile(std::vector<double> values, double q);

} // namespace solarxai::bayesian
