#include "solarxai/network.hpp"

#include "solarxai/errors.hpp"
#include "solarxai/random.hpp"

#include <cmath>
#include <numeric>

namespace solarxai::network {

using autodiff::Graph;
using autodiff::TensorRef;

std::string to_string(Activation a) {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
    }
    return "identity";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

std::vector<LayerSpec> default_hidden() {
    return {{50, Activation::relu}, {30, Activation::relu}, {10, Activation::relu}};
}

double OutputHead::apply(double z) const noexcept {
    switch (kind) {
    case Kind::sigmoid_classifier: return autodiff::sigmoid(z);
    case Kind::capacity_scaled: return capacity * autodiff::sigmoid(z);
    case Kind::identity: return z;
    }
    return z;
}

TensorRef activate(TensorRef z, Activation a) {
    switch (a) {
    case Activation::relu: return autodiff::relu(z);
    case Activation::sigmoid: return autodiff::sigmoid(z);
    case Activation::identity: return z;
    }
    return z;
}

TensorRef apply_head(TensorRef logit, const OutputHead& head) {
    switch (head.kind) {
    case OutputHead::Kind::sigmoid_classifier: return autodiff::sigmoid(logit);
    case OutputHead::Kind::capacity_scaled: return head.capacity * autodiff::sigmoid(logit);
    case OutputHead::Kind::identity: return logit;
    }
    return logit;
}

namespace {

Vector activate(const Vector& z, Activation a) {
    switch (a) {
    case Activation::relu: return z.unaryExpr([](double v) { return v > 0.0 ? v : 0.0; });
    case Activation::sigmoid: return z.unaryExpr([](double v) { return autodiff::sigmoid(v); });
    case Activation::identity: return z;
    }
    return z;
}

Matrix activate(const Matrix& z, Activation a) {
    switch (a) {
    case Activation::relu: return z.unaryExpr([](double v) { return v > 0.0 ? v : 0.0; });
    case Activation::sigmoid: return z.unaryExpr([](double v) { return autodiff::sigmoid(v); });
    case Activation::identity: return z;
    }
    return z;
}

std::string head_kind_name(OutputHead::Kind k) {
    switch (k) {
    case OutputHead::Kind::sigmoid_classifier: return "sigmoid_classifier";
    case OutputHead::Kind::capacity_scaled: return "capacity_scaled";
    case OutputHead::Kind::identity: return "identity";
    }
    return "identity";
}

OutputHead::Kind head_kind_from_name(const std::string& s) {
    if (s == "sigmoid_classifier") return OutputHead::Kind::sigmoid_classifier;
    if (s == "capacity_scaled") return OutputHead::Kind::capacity_scaled;
    if (s == "identity") return OutputHead::Kind::identity;
    throw DataError("unknown output head '" + s + "'");
}

} // namespace

Network::Network(int input_width, std::vector<DenseLayer> layers, OutputHead head,
                 std::vector<std::string> feature_names)
    : input_width_(input_width), layers_(std::move(layers)), head_(head) {
    if (input_width_ < 1) {
        throw std::invalid_argument("input width must be at least 1");
    }
    if (layers_.empty()) {
        throw std::invalid_argument("network needs at least one layer");
    }
    Eigen::Index fan_in = input_width_;
    for (const DenseLayer& l : layers_) {
        if (l.weights.cols() != fan_in || l.bias.size() != l.weights.rows() || l.weights.rows() < 1) {
            throw std::invalid_argument("layer dimensions do not conform");
        }
        fan_in = l.weights.rows();
    }
    if (fan_in != 1 || layers_.back().activation != Activation::identity) {
        throw std::invalid_argument("final layer must be a single identity unit");
    }
    if (head_.kind == OutputHead::Kind::capacity_scaled && !(head_.capacity > 0.0)) {
        throw std::invalid_argument("capacity must be positive");
    }
    set_feature_names(std::move(feature_names));
}

void Network::set_feature_names(std::vector<std::string> names) {
    if (names.empty()) {
        for (int j = 0; j < input_width_; ++j) {
            names.push_back("x" + std::to_string(j));
        }
    }
    if (static_cast<int>(names.size()) != input_width_) {
        throw std::invalid_argument("feature name count does not match input width");
    }
    feature_names_ = std::move(names);
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const DenseLayer& l : layers_) {
        n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    }
    return n;
}

double Network::predict(const Vector& x) const {
    if (x.size() != input_width_) {
        throw std::invalid_argument("input has " + std::to_string(x.size()) + " features, expected " +
                                    std::to_string(input_width_));
    }
    if (!x.allFinite()) {
        throw std::invalid_argument("input contains non-finite values");
    }
    Vector a = x;
    for (const DenseLayer& l : layers_) {
        Vector z = l.weights * a + l.bias;
        a = activate(z, l.activation);
    }
    return head_.apply(a(0));
}

Vector Network::predict_batch(const Matrix& rows) const {
    if (rows.cols() != input_width_) {
        throw std::invalid_argument("input has " + std::to_string(rows.cols()) +
                                    " features, expected " + std::to_string(input_width_));
    }
    if (!rows.allFinite()) {
        throw std::invalid_argument("input contains non-finite values");
    }
    Matrix a = rows.transpose();
    for (const DenseLayer& l : layers_) {
        Matrix z = l.weights * a;
        z.colwise() += l.bias;
        a = activate(z, l.activation);
    }
    Vector out(a.cols());
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        out(i) = head_.apply(a(0, i));
    }
    return out;
}

GraphOutput Network::build(Graph& g, TensorRef x, ParamNodes* params) const {
    if (x.rows() != input_width_) {
        throw std::invalid_argument("graph input width does not match the network");
    }
    const Eigen::Index batch = x.cols();
    const TensorRef ones = g.constant(1, batch, 1.0);
    if (params) {
        params->weights.clear();
        params->biases.clear();
    }
    TensorRef a = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const DenseLayer& l = layers_[i];
        TensorRef w = params ? g.input(l.weights) : g.constant(l.weights);
        TensorRef b = params ? g.input(Matrix(l.bias)) : g.constant(Matrix(l.bias));
        if (params) {
            params->weights.push_back(w);
            params->biases.push_back(b);
        }
        TensorRef z = autodiff::matvec(w, a) + autodiff::matvec(b, ones);
        a = i + 1 == layers_.size() ? z : activate(z, l.activation);
    }
    return {a, apply_head(a, head_)};
}

nlohmann::json Network::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "deterministic";
    j["input_width"] = input_width_;
    j["head"] = {{"kind", head_kind_name(head_.kind)}};
    if (head_.kind == OutputHead::Kind::capacity_scaled) {
        j["head"]["capacity"] = head_.capacity;
    }
    nlohmann::json layers = nlohmann::json::array();
    for (const DenseLayer& l : layers_) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weights.size()));
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
                w.push_back(l.weights(r, c));
            }
        }
        layers.push_back({{"activation", to_string(l.activation)},
                          {"rows", l.weights.rows()},
                          {"cols", l.weights.cols()},
                          {"weights", w},
                          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    }
    j["layers"] = std::move(layers);
    j["feature_names"] = feature_names_;
    return j;
}

Network Network::from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != 1) {
            throw DataError("unsupported model schema version");
        }
        if (j.value("kind", "deterministic") != "deterministic") {
            throw DataError("model is not a deterministic network");
        }
        const int width = j.at("input_width").get<int>();
        OutputHead head;
        head.kind = head_kind_from_name(j.at("head").at("kind").get<std::string>());
        if (head.kind == OutputHead::Kind::capacity_scaled) {
            head.capacity = j.at("head").at("capacity").get<double>();
        }
        std::vector<DenseLayer> layers;
        Eigen::Index fan_in = width;
        for (const auto& lj : j.at("layers")) {
            const auto w = lj.at("weights").get<std::vector<double>>();
            const auto b = lj.at("bias").get<std::vector<double>>();
            const auto rows = static_cast<Eigen::Index>(b.size());
            if (rows == 0 || static_cast<Eigen::Index>(w.size()) != rows * fan_in) {
                throw DataError("layer weights do not match their declared shape");
            }
            DenseLayer l;
            l.activation = activation_from_string(lj.at("activation").get<std::string>());
            l.weights.resize(rows, fan_in);
            for (Eigen::Index r = 0; r < rows; ++r) {
                for (Eigen::Index c = 0; c < fan_in; ++c) {
                    l.weights(r, c) = w[static_cast<std::size_t>(r * fan_in + c)];
                }
            }
            l.bias = Eigen::Map<const Vector>(b.data(), rows);
            layers.push_back(std::move(l));
            fan_in = rows;
        }
        return Network(width, std::move(layers), head,
                       j.value("feature_names", std::vector<std::string>{}));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

Network build_network(int input_width, const std::vector<LayerSpec>& hidden, OutputHead head,
                      std::uint64_t rng_seed) {
    if (input_width < 1) {
        throw std::invalid_argument("input width must be at least 1");
    }
    if (hidden.empty()) {
        throw std::invalid_argument("hidden layer list is empty");
    }
    CounterRng rng(rng_seed);
    std::vector<DenseLayer> layers;
    int fan_in = input_width;
    auto make = [&](int width, Activation act) {
        if (width < 1) {
            throw std::invalid_argument("layer width must be at least 1");
        }
        const double limit = std::sqrt(6.0 / (fan_in + width));
        DenseLayer l;
        l.activation = act;
        l.weights.resize(width, fan_in);
        for (Eigen::Index r = 0; r < width; ++r) {
            for (Eigen::Index c = 0; c < fan_in; ++c) {
                l.weights(r, c) = rng.uniform(-limit, limit);
            }
        }
        l.bias = Vector::Zero(width);
        layers.push_back(std::move(l));
        fan_in = width;
    };
    for (const LayerSpec& s : hidden) {
        make(s.width, s.activation);
    }
    make(1, Activation::identity);
    return Network(input_width, std::move(layers), head);
}

void TrainConfig::validate(std::size_t dataset_size) const {
    if (epochs < 0) {
        throw std::invalid_argument("epochs must be non-negative");
    }
    if (batch_size < 1 || static_cast<std::size_t>(batch_size) > dataset_size) {
        throw std::invalid_argument("batch size must lie in [1, dataset size]");
    }
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("Adam betas must lie in (0, 1)");
    }
    if (!(learning_rate >= 0.0) || !(epsilon > 0.0)) {
        throw std::invalid_argument("learning rate must be >= 0 and epsilon > 0");
    }
}

Adam::Adam(const TrainConfig& cfg, const std::vector<Matrix*>& params)
    : lr_(cfg.learning_rate), beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.epsilon),
      params_(params) {
    for (const Matrix* p : params_) {
        m_.push_back(Matrix::Zero(p->rows(), p->cols()));
        v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
}

void Adam::step(const std::vector<Matrix>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grads[k];
        v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grads[k].cwiseProduct(grads[k]);
        Matrix& p = *params_[k];
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const double mhat = m_[k](i) / c1;
            const double vhat = v_[k](i) / c2;
            p(i) -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
    shuffle(order.begin(), order.end(), rng);
    return order;
}

TensorRef batch_loss(const GraphOutput& out, TensorRef targets, Loss loss) {
    Graph& g = out.logit.graph();
    const double inv_batch = 1.0 / static_cast<double>(out.logit.cols());
    if (loss == Loss::binary_cross_entropy) {
        TensorRef per_sample = autodiff::softplus(out.logit) - targets * out.logit;
        return g.scale(autodiff::sum(per_sample), inv_batch);
    }
    return g.scale(autodiff::sum(autodiff::square(out.output - targets)), inv_batch);
}

TrainResult train(Network net, const data::Dataset& data, const TrainConfig& cfg) {
    if (data.empty()) {
        throw std::invalid_argument("training set is empty");
    }
    if (data.width() != net.input_width()) {
        throw std::invalid_argument("dataset width does not match the network");
    }
    cfg.validate(static_cast<std::size_t>(data.size()));
    const bool classifier = net.head().kind == OutputHead::Kind::sigmoid_classifier;
    if ((cfg.loss == Loss::binary_cross_entropy) != classifier) {
        throw std::invalid_argument("binary cross-entropy requires the classifier head and vice versa");
    }

    std::vector<Matrix*> params;
    for (DenseLayer& l : net.mutable_layers()) {
        params.push_back(&l.weights);
    }
    // Biases are kept as one-column matrices during training.
    std::vector<Matrix> biases;
    for (const DenseLayer& l : net.layers()) {
        biases.emplace_back(l.bias);
    }
    for (Matrix& b : biases) {
        params.push_back(&b);
    }
    Adam adam(cfg, params);
    const std::size_t n_layers = net.layers().size();

    TrainResult result;
    const auto n = static_cast<std::size_t>(data.size());
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    Matrix xb;
    Matrix yb;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = epoch_order(n, cfg.rng_seed, epoch);
        double total = 0.0;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t m = std::min(bs, n - start);
            xb.resize(data.width(), static_cast<Eigen::Index>(m));
            yb.resize(1, static_cast<Eigen::Index>(m));
            for (std::size_t k = 0; k < m; ++k) {
                const auto i = static_cast<Eigen::Index>(order[start + k]);
                xb.col(static_cast<Eigen::Index>(k)) = data.features.row(i).transpose();
                yb(0, static_cast<Eigen::Index>(k)) = data.targets(i);
            }
            Graph g;
            ParamNodes nodes;
            const GraphOutput out = net.build(g, g.constant(xb), &nodes);
            const TensorRef loss = batch_loss(out, g.constant(yb), cfg.loss);
            g.forward();
            const double value = loss.value()(0, 0);
            if (!std::isfinite(value)) {
                throw NumericError("divergence: non-finite loss in epoch " + std::to_string(epoch + 1));
            }
            total += value * static_cast<double>(m);
            g.backward(loss);
            std::vector<Matrix> grads;
            grads.reserve(params.size());
            for (const TensorRef& w : nodes.weights) {
                grads.push_back(w.grad());
            }
            for (const TensorRef& b : nodes.biases) {
                grads.push_back(b.grad());
            }
            adam.step(grads);
            for (std::size_t k = 0; k < n_layers; ++k) {
                net.mutable_layers()[k].bias = biases[k].col(0);
            }
        }
        result.loss_trace.push_back(total / static_cast<double>(n));
    }
    result.network = std::move(net);
    return result;
}

int classify(double probability) noexcept { return probability > 0.5 ? 1 : 0; }

Confusion evaluate_classifier(const Network& net, const data::Dataset& data) {
    if (data.empty()) {
        throw std::invalid_argument("evaluation set is empty");
    }
    const Vector p = net.predict_batch(data.features);
    Confusion c;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const int label = classify(p(i));
        const double t = data.targets(i);
        if (t != 0.0 && t != 1.0) {
            throw std::invalid_argument("classifier targets must be 0 or 1");
        }
        const int truth = t == 1.0 ? 1 : 0;
        if (label == 1 && truth == 1) ++c.tp;
        else if (label == 0 && truth == 0) ++c.tn;
        else if (label == 1) ++c.fp;
        else ++c.fn;
    }
    c.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    return c;
}

double evaluate_regressor(const Network& net, const data::Dataset& data) {
    if (data.empty()) {
        throw std::invalid_argument("evaluation set is empty");
    }
    const Vector p = net.predict_batch(data.features);
    return std::sqrt((p - data.targets).squaredNorm() / static_cast<double>(p.size()));
}

int exceedance_from_regression(double predicted_pv, double predicted_load) {
    if (!std::isfinite(predicted_pv) || !std::isfinite(predicted_load) || predicted_pv < 0.0 ||
        predicted_load < 0.0) {
        throw std::invalid_argument("predicted PV and load must be finite and non-negative");
    }
    return predicted_pv > predicted_load ? 1 : 0;
}

} // namespace solarxai::network
