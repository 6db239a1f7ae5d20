#include "solarxai/bayesian.hpp"

#include "solarxai/errors.hpp"
#include "solarxai/io.hpp"
#include "solarxai/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace solarxai::bayesian {

using autodiff::Graph;
using autodiff::TensorRef;

namespace {

Matrix activate(const Matrix& z, Activation a) {
    switch (a) {
    case Activation::relu: return z.unaryExpr([](double v) { return v > 0.0 ? v : 0.0; });
    case Activation::sigmoid: return z.unaryExpr([](double v) { return autodiff::sigmoid(v); });
    case Activation::identity: return z;
    }
    return z;
}

std::vector<double> flat(const Matrix& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out.push_back(m(r, c));
        }
    }
    return out;
}

Matrix unflat(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
    if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
        throw DataError("malformed model file: tensor size does not match its shape");
    }
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
        }
    }
    return m;
}

} // namespace

VariationalNetwork::VariationalNetwork(int input_width, std::vector<VariationalLayer> layers,
                                       double capacity, double prior_std,
                                       std::optional<double> fixed_sigma,
                                       std::vector<std::string> feature_names)
    : input_width_(input_width), layers_(std::move(layers)), capacity_(capacity),
      prior_std_(prior_std), fixed_sigma_(fixed_sigma), feature_names_(std::move(feature_names)) {
    if (input_width_ < 1 || layers_.empty()) {
        throw std::invalid_argument("variational network needs an input and at least one layer");
    }
    if (!(capacity_ > 0.0) || !(prior_std_ > 0.0)) {
        throw std::invalid_argument("capacity and prior std must be positive");
    }
    if (fixed_sigma_ && !(*fixed_sigma_ > 0.0)) {
        throw std::invalid_argument("fixed sigma must be positive");
    }
    Eigen::Index fan_in = input_width_;
    for (const VariationalLayer& l : layers_) {
        const auto rows = l.weight_mean.rows();
        if (l.weight_mean.cols() != fan_in || l.weight_rho.rows() != rows ||
            l.weight_rho.cols() != fan_in || l.bias_mean.size() != rows || l.bias_rho.size() != rows) {
            throw std::invalid_argument("variational layer dimensions do not conform");
        }
        fan_in = rows;
    }
    if (fan_in != 2 || layers_.back().activation != Activation::identity) {
        throw std::invalid_argument("final layer must have two identity units (mean, std)");
    }
    if (feature_names_.empty()) {
        for (int j = 0; j < input_width_; ++j) {
            feature_names_.push_back("x" + std::to_string(j));
        }
    }
}

WeightSample VariationalNetwork::sample(std::uint64_t seed) const {
    CounterRng rng(seed);
    WeightSample w;
    for (const VariationalLayer& l : layers_) {
        Matrix wt(l.weight_mean.rows(), l.weight_mean.cols());
        for (Eigen::Index r = 0; r < wt.rows(); ++r) {
            for (Eigen::Index c = 0; c < wt.cols(); ++c) {
                wt(r, c) = l.weight_mean(r, c) + autodiff::softplus(l.weight_rho(r, c)) * rng.normal();
            }
        }
        Vector b(l.bias_mean.size());
        for (Eigen::Index r = 0; r < b.size(); ++r) {
            b(r) = l.bias_mean(r) + autodiff::softplus(l.bias_rho(r)) * rng.normal();
        }
        w.weights.push_back(std::move(wt));
        w.biases.push_back(std::move(b));
    }
    return w;
}

WeightSample VariationalNetwork::mean_weights() const {
    WeightSample w;
    for (const VariationalLayer& l : layers_) {
        w.weights.push_back(l.weight_mean);
        w.biases.push_back(l.bias_mean);
    }
    return w;
}

PointPrediction VariationalNetwork::predict(const WeightSample& w, const Matrix& rows) const {
    if (rows.cols() != input_width_) {
        throw std::invalid_argument("input has " + std::to_string(rows.cols()) + " features, expected " +
                                    std::to_string(input_width_));
    }
    if (!rows.allFinite()) {
        throw std::invalid_argument("input contains non-finite values");
    }
    Matrix a = rows.transpose();
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        Matrix z = w.weights[k] * a;
        z.colwise() += w.biases[k];
        a = activate(z, layers_[k].activation);
    }
    PointPrediction p;
    p.mean.resize(a.cols());
    p.sigma.resize(a.cols());
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        p.mean(i) = capacity_ * autodiff::sigmoid(a(0, i));
        p.sigma(i) = fixed_sigma_ ? *fixed_sigma_
                                  : capacity_ * (autodiff::softplus(a(1, i)) + kSigmaFloor);
    }
    return p;
}

void VariationalNetwork::collapse_posterior() {
    for (VariationalLayer& l : layers_) {
        l.weight_rho.setConstant(-1e4);
        l.bias_rho.setConstant(-1e4);
    }
}

nlohmann::json VariationalNetwork::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "bayesian";
    j["input_width"] = input_width_;
    j["head"] = {{"kind", "gaussian"}, {"capacity", capacity_}};
    if (fixed_sigma_) {
        j["head"]["fixed_sigma"] = *fixed_sigma_;
    }
    j["prior_std"] = prior_std_;
    nlohmann::json layers = nlohmann::json::array();
    for (const VariationalLayer& l : layers_) {
        layers.push_back({{"activation", network::to_string(l.activation)},
                          {"rows", l.weight_mean.rows()},
                          {"cols", l.weight_mean.cols()},
                          {"weight_mean", flat(l.weight_mean)},
                          {"weight_rho", flat(l.weight_rho)},
                          {"bias_mean", flat(l.bias_mean)},
                          {"bias_rho", flat(l.bias_rho)}});
    }
    j["layers"] = std::move(layers);
    j["feature_names"] = feature_names_;
    return j;
}

VariationalNetwork VariationalNetwork::from_json(const nlohmann::json& j) {
    try {
        if (j.value("kind", "deterministic") != "bayesian") {
            throw DataError("model has no weight distributions");
        }
        if (j.at("schema_version").get<int>() != 1) {
            throw DataError("unsupported model schema version");
        }
        const int width = j.at("input_width").get<int>();
        std::vector<VariationalLayer> layers;
        Eigen::Index fan_in = width;
        for (const auto& lj : j.at("layers")) {
            const auto rows = lj.at("rows").get<Eigen::Index>();
            if (lj.at("cols").get<Eigen::Index>() != fan_in) {
                throw DataError("malformed model file: layer shapes do not chain");
            }
            VariationalLayer l;
            l.activation = network::activation_from_string(lj.at("activation").get<std::string>());
            l.weight_mean = unflat(lj.at("weight_mean").get<std::vector<double>>(), rows, fan_in);
            l.weight_rho = unflat(lj.at("weight_rho").get<std::vector<double>>(), rows, fan_in);
            l.bias_mean = unflat(lj.at("bias_mean").get<std::vector<double>>(), rows, 1);
            l.bias_rho = unflat(lj.at("bias_rho").get<std::vector<double>>(), rows, 1);
            layers.push_back(std::move(l));
            fan_in = rows;
        }
        std::optional<double> fixed;
        if (j.at("head").contains("fixed_sigma")) {
            fixed = j.at("head").at("fixed_sigma").get<double>();
        }
        return VariationalNetwork(width, std::move(layers), j.at("head").at("capacity").get<double>(),
                                  j.at("prior_std").get<double>(), fixed,
                                  j.value("feature_names", std::vector<std::string>{}));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

VariationalNetwork init_bnn(int input_width, const BnnConfig& cfg) {
    if (cfg.hidden.empty()) {
        throw std::invalid_argument("hidden layer list is empty");
    }
    // Means follow the deterministic Glorot initialisation.
    std::vector<network::LayerSpec> hidden = cfg.hidden;
    const network::Network det =
        network::build_network(input_width, hidden, network::OutputHead::linear(),
                               derive_seed(cfg.train.rng_seed, "bnn-init"));
    CounterRng rng(derive_seed(cfg.train.rng_seed, "bnn-init-head"));
    std::vector<VariationalLayer> layers;
    for (std::size_t k = 0; k < det.layers().size(); ++k) {
        const auto& d = det.layers()[k];
        VariationalLayer l;
        l.activation = d.activation;
        if (k + 1 == det.layers().size()) {
            // Two output units: mean and std.
            const auto fan_in = d.weights.cols();
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + 2));
            l.weight_mean.resize(2, fan_in);
            for (Eigen::Index c = 0; c < fan_in; ++c) {
                l.weight_mean(0, c) = d.weights(0, c);
                l.weight_mean(1, c) = rng.uniform(-limit, limit);
            }
            l.bias_mean = Vector::Zero(2);
            // Start with a predictive std of roughly 5% of capacity.
            l.bias_mean(1) = std::log(std::expm1(0.05));
        } else {
            l.weight_mean = d.weights;
            l.bias_mean = d.bias;
        }
        l.weight_rho = Matrix::Constant(l.weight_mean.rows(), l.weight_mean.cols(), cfg.initial_rho);
        l.bias_rho = Vector::Constant(l.bias_mean.size(), cfg.initial_rho);
        layers.push_back(std::move(l));
    }
    return VariationalNetwork(input_width, std::move(layers), cfg.capacity, cfg.prior_std,
                              cfg.fixed_sigma, det.feature_names());
}

BnnTrainResult train_bnn(const data::Dataset& data, const BnnConfig& cfg) {
    if (data.empty()) {
        throw std::invalid_argument("training set is empty");
    }
    return train_bnn(init_bnn(static_cast<int>(data.width()), cfg), data, cfg);
}

BnnTrainResult train_bnn(VariationalNetwork net, const data::Dataset& data, const BnnConfig& cfg) {
    if (data.empty()) {
        throw std::invalid_argument("training set is empty");
    }
    if (data.width() != net.input_width()) {
        throw std::invalid_argument("dataset width does not match the network");
    }
    cfg.train.validate(static_cast<std::size_t>(data.size()));
    if (cfg.mc_train_samples < 1) {
        throw std::invalid_argument("mc_train_samples must be at least 1");
    }
    const auto n = static_cast<std::size_t>(data.size());
    const auto bs = static_cast<std::size_t>(cfg.train.batch_size);
    const std::size_t num_batches = (n + bs - 1) / bs;
    const double kl_weight = cfg.kl_weight.value_or(1.0 / static_cast<double>(num_batches));
    if (!(kl_weight >= 0.0)) {
        throw std::invalid_argument("kl_weight must be non-negative");
    }
    const double cap = net.capacity();
    const double prior_var = net.prior_std() * net.prior_std();
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

    auto& layers = net.mutable_layers();
    std::vector<Matrix> bias_mean, bias_rho;
    for (const auto& l : layers) {
        bias_mean.emplace_back(l.bias_mean);
        bias_rho.emplace_back(l.bias_rho);
    }
    std::vector<Matrix*> params;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        params.push_back(&layers[k].weight_mean);
        params.push_back(&layers[k].weight_rho);
        params.push_back(&bias_mean[k]);
        params.push_back(&bias_rho[k]);
    }
    std::size_t param_count = 0;
    for (const Matrix* p : params) {
        param_count += static_cast<std::size_t>(p->size());
    }
    param_count /= 2;  // mean/rho pairs
    network::Adam adam(cfg.train, params);

    Matrix select_mean(1, 2), select_std(1, 2);
    select_mean << 1.0, 0.0;
    select_std << 0.0, 1.0;

    BnnTrainResult result;
    std::uint64_t step = 0;
    Matrix xb, yb;
    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        const auto order = network::epoch_order(n, cfg.train.rng_seed, epoch);
        double total = 0.0;
        for (std::size_t start = 0; start < n; start += bs, ++step) {
            const std::size_t m = std::min(bs, n - start);
            const auto mb = static_cast<Eigen::Index>(m);
            xb.resize(data.width(), mb);
            yb.resize(1, mb);
            for (std::size_t k = 0; k < m; ++k) {
                const auto i = static_cast<Eigen::Index>(order[start + k]);
                xb.col(static_cast<Eigen::Index>(k)) = data.features.row(i).transpose();
                yb(0, static_cast<Eigen::Index>(k)) = data.targets(i) / cap;
            }

            Graph g;
            std::vector<TensorRef> nodes;
            for (const Matrix* p : params) {
                nodes.push_back(g.input(*p));
            }
            std::vector<TensorRef> stds;
            for (std::size_t k = 0; k < nodes.size(); k += 2) {
                stds.push_back(autodiff::softplus(nodes[k + 1]));
            }
            const TensorRef x = g.constant(xb);
            const TensorRef y = g.constant(yb);
            const TensorRef ones = g.constant(1, mb, 1.0);
            const TensorRef floor = g.constant(1, mb, VariationalNetwork::kSigmaFloor);
            CounterRng noise(derive_seed(derive_seed(cfg.train.rng_seed, "bnn-eps"), step));

            TensorRef nll;
            for (int s = 0; s < cfg.mc_train_samples; ++s) {
                TensorRef a = x;
                for (std::size_t k = 0; k < layers.size(); ++k) {
                    const TensorRef wm = nodes[4 * k], bm = nodes[4 * k + 2];
                    Matrix ew(wm.rows(), wm.cols()), eb(bm.rows(), 1);
                    for (Eigen::Index r = 0; r < ew.rows(); ++r) {
                        for (Eigen::Index c = 0; c < ew.cols(); ++c) {
                            ew(r, c) = noise.normal();
                        }
                    }
                    for (Eigen::Index r = 0; r < eb.rows(); ++r) {
                        eb(r, 0) = noise.normal();
                    }
                    const TensorRef w = wm + stds[2 * k] * g.constant(ew);
                    const TensorRef b = bm + stds[2 * k + 1] * g.constant(eb);
                    const TensorRef z = autodiff::matvec(w, a) + autodiff::matvec(b, ones);
                    a = k + 1 == layers.size() ? z : network::activate(z, layers[k].activation);
                }
                const TensorRef mu = autodiff::sigmoid(autodiff::matvec(g.constant(select_mean), a));
                TensorRef log_sigma;
                TensorRef inv_var;
                if (net.fixed_sigma()) {
                    const double sig = *net.fixed_sigma() / cap;
                    log_sigma = g.constant(1, mb, std::log(sig));
                    inv_var = g.constant(1, mb, 1.0 / (sig * sig));
                } else {
                    const TensorRef sigma =
                        autodiff::softplus(autodiff::matvec(g.constant(select_std), a)) + floor;
                    log_sigma = autodiff::log(sigma);
                    inv_var = autodiff::exp(g.scale(log_sigma, -2.0));
                }
                const TensorRef term = autodiff::sum(log_sigma) +
                                       g.scale(autodiff::sum(autodiff::square(y - mu) * inv_var), 0.5);
                nll = s == 0 ? term : nll + term;
            }
            if (cfg.mc_train_samples > 1) {
                nll = g.scale(nll, 1.0 / cfg.mc_train_samples);
            }

            // KL(N(m, s^2) || N(0, p^2)) summed over weights, without its constant.
            TensorRef loss = nll;
            if (kl_weight > 0.0) {
                TensorRef kl;
                for (std::size_t k = 0; k < stds.size(); ++k) {
                    const TensorRef mean = nodes[2 * k];
                    const TensorRef part =
                        g.scale(autodiff::sum(autodiff::square(stds[k]) + autodiff::square(mean)),
                                0.5 / prior_var) -
                        autodiff::sum(autodiff::log(stds[k]));
                    kl = k == 0 ? part : kl + part;
                }
                loss = loss + g.scale(kl, kl_weight);
            }
            g.forward();
            const double value = loss.value()(0, 0);
            if (!std::isfinite(value)) {
                throw NumericError("divergence: non-finite ELBO in epoch " + std::to_string(epoch + 1));
            }
            const double kl_const =
                kl_weight * static_cast<double>(param_count) * (std::log(net.prior_std()) - 0.5);
            total += value + kl_const + static_cast<double>(m) * (half_log_2pi + std::log(cap));
            g.backward(loss);
            std::vector<Matrix> grads;
            grads.reserve(nodes.size());
            for (const TensorRef& t : nodes) {
                grads.push_back(t.grad());
            }
            adam.step(grads);
            for (std::size_t k = 0; k < layers.size(); ++k) {
                layers[k].bias_mean = bias_mean[k].col(0);
                layers[k].bias_rho = bias_rho[k].col(0);
            }
        }
        result.elbo_trace.push_back(total / static_cast<double>(n));
    }
    result.network = std::move(net);
    return result;
}

std::vector<UncertaintyEstimate> predict_uncertainty_batch(const VariationalNetwork& bnn,
                                                           const Matrix& rows, int mc_samples,
                                                           std::uint64_t rng_seed) {
    if (mc_samples < 2) {
        throw std::invalid_argument("mc_samples must be at least 2 (std undefined)");
    }
    const Eigen::Index n = rows.rows();
    // Welford accumulators per row; identical draws give exactly zero spread.
    Vector mean = Vector::Zero(n), m2 = Vector::Zero(n), mean_var = Vector::Zero(n);
    for (int s = 0; s < mc_samples; ++s) {
        const PointPrediction p =
            bnn.predict(bnn.sample(derive_seed(rng_seed, static_cast<std::uint64_t>(s))), rows);
        const double k = s + 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double delta = p.mean(i) - mean(i);
            mean(i) += delta / k;
            m2(i) += delta * (p.mean(i) - mean(i));
            mean_var(i) += (p.sigma(i) * p.sigma(i) - mean_var(i)) / k;
        }
    }
    std::vector<UncertaintyEstimate> out(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        UncertaintyEstimate& e = out[static_cast<std::size_t>(i)];
        e.mean = mean(i);
        e.epistemic_std = std::sqrt(m2(i) / (mc_samples - 1.0));
        e.aleatoric_std = std::sqrt(mean_var(i));
        e.total_std = std::sqrt(e.aleatoric_std * e.aleatoric_std + e.epistemic_std * e.epistemic_std);
        e.lower95 = e.mean - kBand95 * e.total_std;
        e.upper95 = e.mean + kBand95 * e.total_std;
    }
    return out;
}

UncertaintyEstimate predict_uncertainty(const VariationalNetwork& bnn, const Vector& x,
                                        int mc_samples, std::uint64_t rng_seed) {
    return predict_uncertainty_batch(bnn, x.transpose(), mc_samples, rng_seed).front();
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw std::invalid_argument("quantile of an empty series");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw std::invalid_argument("quantile level must lie in [0, 1]");
    }
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<ForecastPoint> forecast_series(const VariationalNetwork& bnn, const data::Dataset& samples,
                                           int mc_samples, std::uint64_t rng_seed,
                                           double flag_quantile) {
    if (mc_samples < 2) {
        throw std::invalid_argument("mc_samples must be at least 2 (std undefined)");
    }
    std::vector<ForecastPoint> out;
    if (samples.empty()) {
        return out;
    }
    const auto estimates = predict_uncertainty_batch(bnn, samples.features, mc_samples, rng_seed);
    std::vector<double> totals;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        ForecastPoint p;
        p.timestamp = i < samples.timestamps.size() ? samples.timestamps[i] : std::to_string(i);
        p.estimate = estimates[i];
        p.actual = samples.targets(static_cast<Eigen::Index>(i));
        totals.push_back(estimates[i].total_std);
        out.push_back(std::move(p));
    }
    const double threshold = quantile(totals, flag_quantile);
    for (auto& p : out) {
        p.high_uncertainty = p.estimate.total_std > threshold;
    }
    return out;
}

double coverage(const std::vector<ForecastPoint>& series) {
    if (series.empty()) {
        return 0.0;
    }
    std::size_t inside = 0;
    for (const auto& p : series) {
        if (p.actual >= p.estimate.lower95 && p.actual <= p.estimate.upper95) {
            ++inside;
        }
    }
    return static_cast<double>(inside) / static_cast<double>(series.size());
}

std::string forecast_csv(const std::vector<ForecastPoint>& series) {
    std::string out =
        "timestamp,mean,aleatoric_std,epistemic_std,total_std,lower95,upper95,actual,high_uncertainty_flag\n";
    for (const auto& p : series) {
        const auto& e = p.estimate;
        out += p.timestamp;
        for (double v : {e.mean, e.aleatoric_std, e.epistemic_std, e.total_std, e.lower95, e.upper95,
                         p.actual}) {
            out += ',';
            out += io::format_double(v);
        }
        out += p.high_uncertainty ? ",1\n" : ",0\n";
    }
    return out;
}

} // namespace solarxai::bayesian
