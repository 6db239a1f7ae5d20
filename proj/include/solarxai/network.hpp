#pragma once

// Dense feedforward forecasters: a sigmoid classifier for the
// "PV exceeds load" label and a capacity-bounded PV regressor.

#include "solarxai/autodiff.hpp"
#include "solarxai/data.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace solarxai::network {

using autodiff::Matrix;
using autodiff::Vector;

enum class Activation { relu, sigmoid, identity };
std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
    int width = 1;
    Activation activation = Activation::relu;
};

/// The hidden stack used for both forecasters: 50-30-10 ReLU.
std::vector<LayerSpec> default_hidden();

struct OutputHead {
    enum class Kind {
        sigmoid_classifier,  // sigmoid(z), a probability
        capacity_scaled,     // capacity * sigmoid(z), kWh
        identity,            // z itself; used for affine test models
    };
    Kind kind = Kind::sigmoid_classifier;
    double capacity = 1.0;

    static OutputHead classifier() { return {Kind::sigmoid_classifier, 1.0}; }
    static OutputHead capacity_scaled(double capacity) { return {Kind::capacity_scaled, capacity}; }
    static OutputHead linear() { return {Kind::identity, 1.0}; }

    double apply(double z) const noexcept;
};

struct DenseLayer {
    Matrix weights;  // out x in
    Vector bias;     // out
    Activation activation = Activation::relu;
};

/// Graph nodes created for the trainable tensors of a network.
struct ParamNodes {
    std::vector<autodiff::TensorRef> weights;
    std::vector<autodiff::TensorRef> biases;
};

struct GraphOutput {
    autodiff::TensorRef logit;   // 1 x batch, pre-head
    autodiff::TensorRef output;  // 1 x batch, after the head
};

/// Applies an activation to a graph node.
autodiff::TensorRef activate(autodiff::TensorRef z, Activation a);
/// Applies the output head to a 1 x batch logit node.
autodiff::TensorRef apply_head(autodiff::TensorRef logit, const OutputHead& head);

class Network {
public:
    Network() = default;
    /// The last layer must have width 1 and identity activation; the head
    /// is applied on top of it.
    Network(int input_width, std::vector<DenseLayer> layers, OutputHead head,
            std::vector<std::string> feature_names = {});

    int input_width() const noexcept { return input_width_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }
    const OutputHead& head() const noexcept { return head_; }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    void set_feature_names(std::vector<std::string> names);
    std::size_t parameter_count() const;

    double predict(const Vector& x) const;
    /// One prediction per row of `rows`.
    Vector predict_batch(const Matrix& rows) const;

    /// Records the forward pass for a features x batch input node. With
    /// `params` the weights become graph inputs (for training); otherwise
    /// they are constants.
    GraphOutput build(autodiff::Graph& g, autodiff::TensorRef x, ParamNodes* params = nullptr) const;

    nlohmann::json to_json() const;
    static Network from_json(const nlohmann::json& j);

private:
    int input_width_ = 0;
    std::vector<DenseLayer> layers_;
    OutputHead head_;
    std::vector<std::string> feature_names_;
};

/// Glorot-uniform weights, zero biases. Identical seeds give identical weights.
Network build_network(int input_width, const std::vector<LayerSpec>& hidden, OutputHead head,
                      std::uint64_t rng_seed);

enum class Loss { binary_cross_entropy, mse };

struct TrainConfig {
    Loss loss = Loss::binary_cross_entropy;
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t rng_seed = 0;

    void validate(std::size_t dataset_size) const;
};

/// Adam over a fixed list of parameter tensors.
class Adam {
public:
    Adam(const TrainConfig& cfg, const std::vector<Matrix*>& params);
    void step(const std::vector<Matrix>& grads);

private:
    double lr_, beta1_, beta2_, eps_;
    std::vector<Matrix*> params_;
    std::vector<Matrix> m_, v_;
    long t_ = 0;
};

/// Epoch order of sample indices, reproducible from (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

/// Loss node for a batch. BCE is evaluated on the logit as
/// softplus(z) - y z, which equals -[y log p + (1-y) log(1-p)] and stays finite.
autodiff::TensorRef batch_loss(const GraphOutput& out, autodiff::TensorRef targets, Loss loss);

struct TrainResult {
    Network network;
    std::vector<double> loss_trace;  // mean loss per epoch
};

TrainResult train(Network net, const data::Dataset& data, const TrainConfig& cfg);

struct Confusion {
    long tp = 0, tn = 0, fp = 0, fn = 0;
    double accuracy = 0.0;
    long total() const noexcept { return tp + tn + fp + fn; }
};

/// Predicted label is 1 iff the output is strictly greater than 0.5.
int classify(double probability) noexcept;
Confusion evaluate_classifier(const Network& net, const data::Dataset& data);
double evaluate_regressor(const Network& net, const data::Dataset& data);

/// 1 iff predicted PV strictly exceeds the predicted load.
int exceedance_from_regression(double predicted_pv, double predicted_load);

} // namespace solarxai::network
