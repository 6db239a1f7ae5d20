#include "solarxai/attribution.hpp"

#include "solarxai/errors.hpp"
#include "solarxai/io.hpp"
#include "solarxai/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace solarxai::attribution {

using autodiff::Graph;
using autodiff::TensorRef;

std::string to_string(Method m) {
    switch (m) {
    case Method::gradient: return "gradient";
    case Method::gradient_x_input: return "gradient_x_input";
    case Method::integrated_gradients: return "integrated_gradients";
    case Method::expected_gradients: return "expected_gradients";
    case Method::deeplift: return "deeplift";
    }
    return "gradient";
}

Method method_from_string(const std::string& s) {
    if (s == "gradient") return Method::gradient;
    if (s == "gxi" || s == "gradient_x_input") return Method::gradient_x_input;
    if (s == "ig" || s == "integrated_gradients") return Method::integrated_gradients;
    if (s == "eg" || s == "expected_gradients") return Method::expected_gradients;
    if (s == "deeplift") return Method::deeplift;
    throw UsageError("unknown attribution method '" + s + "'");
}

Baseline Baseline::zero() {
    Baseline b;
    b.label = "zero";
    return b;
}

Baseline Baseline::fixed(Vector point, std::string label) {
    Baseline b;
    b.kind = Kind::fixed;
    b.point = std::move(point);
    b.label = std::move(label);
    return b;
}

Baseline Baseline::dataset(Matrix background, int mc_samples, std::string label) {
    if (mc_samples < 1) {
        throw std::invalid_argument("mc_samples must be at least 1");
    }
    Baseline b;
    b.kind = Kind::dataset;
    b.background = std::move(background);
    b.mc_samples = mc_samples;
    b.label = std::move(label);
    return b;
}

Vector Baseline::resolve(Eigen::Index width) const {
    switch (kind) {
    case Kind::zero:
        return Vector::Zero(width);
    case Kind::fixed:
        if (point.size() != width) {
            throw std::invalid_argument("baseline length does not match the input width");
        }
        return point;
    case Kind::dataset:
        break;
    }
    throw std::invalid_argument("a dataset baseline has no single reference point");
}

std::string Baseline::describe() const {
    return label.empty() ? (kind == Kind::zero ? "zero" : kind == Kind::fixed ? "fixed" : "dataset")
                         : label;
}

namespace {

void check_input(const Network& net, const Vector& x) {
    if (x.size() != net.input_width()) {
        throw std::invalid_argument("input has " + std::to_string(x.size()) + " features, expected " +
                                    std::to_string(net.input_width()));
    }
    if (!x.allFinite()) {
        throw std::invalid_argument("input contains non-finite values");
    }
}

AttributionReport make_report(const Network& net, Method method, const Vector& x) {
    AttributionReport r;
    r.method = method;
    r.feature_names = net.feature_names();
    r.feature_values = x;
    r.predicted_value = net.predict(x);
    return r;
}

} // namespace

Matrix input_gradients(const Network& net, const Matrix& points) {
    if (points.cols() != net.input_width()) {
        throw std::invalid_argument("points have the wrong width");
    }
    Graph g;
    TensorRef x = g.input(Matrix(points.transpose()));
    const auto out = net.build(g, x);
    TensorRef total = autodiff::sum(out.output);
    g.forward();
    g.backward(total);
    Matrix grads = x.grad().transpose();
    if (!grads.allFinite()) {
        throw NumericError("non-finite input gradient");
    }
    return grads;
}

AttributionReport attr_gradient(const Network& net, const Vector& x) {
    check_input(net, x);
    AttributionReport r = make_report(net, Method::gradient, x);
    r.baseline = "zero";
    r.attributions = input_gradients(net, x.transpose()).row(0).transpose();
    r.base_value = net.predict(Vector::Zero(x.size()));
    r.finalize_residual();
    return r;
}

AttributionReport attr_gradient_x_input(const Network& net, const Vector& x) {
    check_input(net, x);
    AttributionReport r = make_report(net, Method::gradient_x_input, x);
    r.baseline = "zero";
    r.attributions = x.cwiseProduct(input_gradients(net, x.transpose()).row(0).transpose());
    r.base_value = net.predict(Vector::Zero(x.size()));
    r.finalize_residual();
    return r;
}

AttributionReport attr_integrated_gradients(const Network& net, const Vector& x,
                                            const Baseline& baseline, int steps) {
    check_input(net, x);
    if (steps < 1) {
        throw std::invalid_argument("integrated gradients needs at least one step");
    }
    const Vector ref = baseline.resolve(x.size());
    const Vector delta = x - ref;
    Matrix path(steps, x.size());
    for (int k = 0; k < steps; ++k) {
        const double alpha = (k + 0.5) / steps;
        path.row(k) = (ref + alpha * delta).transpose();
    }
    const Matrix grads = input_gradients(net, path);
    AttributionReport r = make_report(net, Method::integrated_gradients, x);
    r.baseline = baseline.describe();
    r.attributions = delta.cwiseProduct(grads.colwise().mean().transpose());
    r.base_value = net.predict(ref);
    r.finalize_residual();
    return r;
}

AttributionReport attr_expected_gradients(const Network& net, const Vector& x,
                                          const Matrix& background, int mc_samples,
                                          std::uint64_t rng_seed, int steps_per_baseline) {
    check_input(net, x);
    if (background.rows() == 0) {
        throw std::invalid_argument("expected gradients needs a nonempty background");
    }
    if (background.cols() != x.size()) {
        throw std::invalid_argument("background width does not match the input");
    }
    if (mc_samples < 1 || steps_per_baseline < 0) {
        throw std::invalid_argument("mc_samples must be >= 1 and steps_per_baseline >= 0");
    }
    CounterRng rng(rng_seed);
    const int per_ref = steps_per_baseline > 0 ? steps_per_baseline : 1;
    const Eigen::Index points = static_cast<Eigen::Index>(mc_samples) * per_ref;
    Matrix path(points, x.size());
    Matrix deltas(points, x.size());
    Eigen::Index row = 0;
    for (int s = 0; s < mc_samples; ++s) {
        const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(background.rows())));
        const Vector ref = background.row(j).transpose();
        const Vector delta = x - ref;
        for (int k = 0; k < per_ref; ++k, ++row) {
            const double alpha = steps_per_baseline > 0 ? (k + 0.5) / steps_per_baseline : rng.uniform();
            path.row(row) = (ref + alpha * delta).transpose();
            deltas.row(row) = delta.transpose();
        }
    }
    const Matrix grads = input_gradients(net, path);
    AttributionReport r = make_report(net, Method::expected_gradients, x);
    r.baseline = "dataset";
    r.attributions = deltas.cwiseProduct(grads).colwise().mean().transpose();
    r.base_value = net.predict_batch(background).mean();
    r.finalize_residual();
    return r;
}

Matrix deeplift_batch(const Network& net, const Matrix& inputs, const Vector& baseline) {
    if (inputs.cols() != net.input_width() || baseline.size() != net.input_width()) {
        throw std::invalid_argument("inputs or baseline have the wrong width");
    }
    const Matrix xt = inputs.transpose();
    const Matrix refs = baseline.replicate(1, inputs.rows());
    Graph at_ref;
    {
        // Same op sequence as below so node indices line up.
        TensorRef x = at_ref.input(refs);
        autodiff::sum(net.build(at_ref, x).output);
        at_ref.forward();
    }
    Graph g;
    TensorRef x = g.input(xt);
    const auto out = net.build(g, x);
    TensorRef total = autodiff::sum(out.output);
    g.forward();
    g.backward_rescale(total, at_ref);
    Matrix attr = (xt - refs).cwiseProduct(x.grad()).transpose();
    if (!attr.allFinite()) {
        throw NumericError("non-finite DeepLIFT multiplier");
    }
    return attr;
}

AttributionReport attr_deeplift(const Network& net, const Vector& x, const Baseline& baseline) {
    check_input(net, x);
    const Vector ref = baseline.resolve(x.size());
    AttributionReport r = make_report(net, Method::deeplift, x);
    r.baseline = baseline.describe();
    r.attributions = deeplift_batch(net, x.transpose(), ref).row(0).transpose();
    r.base_value = net.predict(ref);
    r.finalize_residual();
    return r;
}

AttributionReport explain(const Network& net, const Vector& x, Method method,
                          const MethodParams& params) {
    switch (method) {
    case Method::gradient: return attr_gradient(net, x);
    case Method::gradient_x_input: return attr_gradient_x_input(net, x);
    case Method::integrated_gradients:
        return attr_integrated_gradients(net, x, params.baseline, params.steps);
    case Method::expected_gradients: {
        if (params.baseline.kind != Baseline::Kind::dataset) {
            throw UsageError("expected-gradients requires dataset background");
        }
        AttributionReport r =
            attr_expected_gradients(net, x, params.baseline.background, params.baseline.mc_samples,
                                    params.seed, params.steps_per_baseline);
        r.baseline = params.baseline.describe();
        return r;
    }
    case Method::deeplift: return attr_deeplift(net, x, params.baseline);
    }
    throw std::invalid_argument("unknown method");
}

Matrix attribute_all(const Network& net, const Matrix& inputs, Method method,
                     const MethodParams& params) {
    if (method == Method::deeplift) {
        return deeplift_batch(net, inputs, params.baseline.resolve(inputs.cols()));
    }
    if (method == Method::gradient || method == Method::gradient_x_input) {
        Matrix g = input_gradients(net, inputs);
        return method == Method::gradient ? g : Matrix(g.cwiseProduct(inputs));
    }
    Matrix out(inputs.rows(), inputs.cols());
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
        MethodParams p = params;
        p.seed = derive_seed(params.seed, static_cast<std::uint64_t>(i));
        out.row(i) = explain(net, inputs.row(i).transpose(), method, p).attributions.transpose();
    }
    return out;
}

Matrix aggregate_groups(const Matrix& per_feature, const std::vector<int>& feature_group,
                        std::size_t group_count) {
    if (static_cast<Eigen::Index>(feature_group.size()) != per_feature.cols()) {
        throw std::invalid_argument("feature group map does not match the attribution width");
    }
    Matrix out = Matrix::Zero(per_feature.rows(), static_cast<Eigen::Index>(group_count));
    for (Eigen::Index j = 0; j < per_feature.cols(); ++j) {
        out.col(feature_group[static_cast<std::size_t>(j)]) += per_feature.col(j);
    }
    return out;
}

AttributionReport group_report(const AttributionReport& report, const std::vector<int>& feature_group,
                               const std::vector<std::string>& group_names) {
    AttributionReport out = report;
    out.feature_names = group_names;
    out.attributions =
        aggregate_groups(report.attributions.transpose(), feature_group, group_names.size())
            .row(0)
            .transpose();
    // Feature values are kept only when the grouping is the identity.
    if (group_names.size() != report.feature_names.size()) {
        out.feature_values = Vector();
    }
    return out;
}

std::vector<Importance> importance_from(const Matrix& per_feature, const data::Dataset& data) {
    if (per_feature.rows() == 0) {
        throw std::invalid_argument("importance needs a nonempty dataset");
    }
    const Matrix grouped = aggregate_groups(per_feature, data.feature_group, data.group_names.size());
    const Vector mean_abs = grouped.cwiseAbs().colwise().mean().transpose();
    std::vector<Importance> out;
    for (std::size_t k = 0; k < data.group_names.size(); ++k) {
        out.push_back({data.group_names[k], mean_abs(static_cast<Eigen::Index>(k))});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Importance& a, const Importance& b) { return a.value > b.value; });
    return out;
}

std::vector<Importance> global_importance(const Network& net, const data::Dataset& data,
                                          Method method, const MethodParams& params) {
    if (data.empty()) {
        throw std::invalid_argument("importance needs a nonempty dataset");
    }
    return importance_from(attribute_all(net, data.features, method, params), data);
}

std::vector<SummaryPoint> summary_from(const Matrix& per_feature, const data::Dataset& data) {
    const Matrix grouped = aggregate_groups(per_feature, data.feature_group, data.group_names.size());
    std::vector<SummaryPoint> out;
    out.reserve(static_cast<std::size_t>(grouped.size()));
    for (Eigen::Index i = 0; i < grouped.rows(); ++i) {
        for (Eigen::Index k = 0; k < grouped.cols(); ++k) {
            out.push_back({static_cast<std::size_t>(i), data.group_names[static_cast<std::size_t>(k)],
                           data.group_raw(i, k), grouped(i, k)});
        }
    }
    return out;
}

std::vector<SummaryPoint> summary_plot_data(const Network& net, const data::Dataset& data,
                                            Method method, const MethodParams& params) {
    return summary_from(attribute_all(net, data.features, method, params), data);
}

ForcePlot force_plot_data(const AttributionReport& report) {
    ForcePlot plot;
    plot.base_value = report.base_value;
    plot.predicted_value = report.predicted_value;
    plot.residual = report.completeness_residual;
    for (std::size_t k = 0; k < report.feature_names.size(); ++k) {
        plot.segments.push_back(
            {report.feature_names[k], report.attributions(static_cast<Eigen::Index>(k))});
    }
    std::stable_sort(plot.segments.begin(), plot.segments.end(),
                     [](const ForceSegment& a, const ForceSegment& b) {
                         return std::abs(a.contribution) > std::abs(b.contribution);
                     });
    return plot;
}

nlohmann::ordered_json report_to_json(const AttributionReport& r) {
    nlohmann::ordered_json j;
    j["method"] = to_string(r.method);
    j["baseline"] = r.baseline;
    j["feature_names"] = r.feature_names;
    j["attributions"] = std::vector<double>(r.attributions.data(), r.attributions.data() + r.attributions.size());
    j["base_value"] = r.base_value;
    j["predicted_value"] = r.predicted_value;
    j["completeness_residual"] = r.completeness_residual;
    return j;
}

std::string report_to_csv(const AttributionReport& r) {
    std::string out = "feature,attribution\n";
    for (std::size_t k = 0; k < r.feature_names.size(); ++k) {
        out += r.feature_names[k] + "," + io::format_double(r.attributions(static_cast<Eigen::Index>(k))) + "\n";
    }
    return out;
}

std::string force_plot_csv(const ForcePlot& plot) {
    std::string out = "feature,contribution\n";
    out += "base_value," + io::format_double(plot.base_value) + "\n";
    for (const auto& s : plot.segments) {
        out += s.feature + "," + io::format_double(s.contribution) + "\n";
    }
    out += "predicted_value," + io::format_double(plot.predicted_value) + "\n";
    out += "completeness_residual," + io::format_double(plot.residual) + "\n";
    return out;
}

std::string summary_csv(const std::vector<SummaryPoint>& points) {
    std::string out = "sample_id,feature,feature_value,attribution\n";
    for (const auto& p : points) {
        out += std::to_string(p.sample_id) + "," + p.feature + "," + io::format_double(p.feature_value) +
               "," + io::format_double(p.attribution) + "\n";
    }
    return out;
}

std::string importance_csv(const std::vector<Importance>& importance) {
    std::string out = "feature,importance\n";
    for (const auto& i : importance) {
        out += i.feature + "," + io::format_double(i.value) + "\n";
    }
    return out;
}

namespace {
std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) {
            ++j;
        }
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            rank[idx[k]] = r;
        }
        i = j + 1;
    }
    return rank;
}
} // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw std::invalid_argument("spearman needs two equal-length series of at least 2 values");
    }
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) {
        return 0.0;
    }
    return sab / std::sqrt(saa * sbb);
}

} // namespace solarxai::attribution
