#include "solarxai/autodiff.hpp"

#include "solarxai/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace solarxai::autodiff {

std::string_view to_string(OpKind kind) noexcept {
    switch (kind) {
    case OpKind::input: return "input";
    case OpKind::constant: return "constant";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::matvec: return "matvec";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::softplus: return "softplus";
    case OpKind::log: return "log";
    case OpKind::exp: return "exp";
    case OpKind::square: return "square";
    case OpKind::sum: return "sum";
    case OpKind::scale: return "scale";
    }
    return "unknown";
}

double sigmoid(double z) noexcept {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) noexcept {
    // log(1 + e^z) = max(z, 0) + log1p(e^-|z|)
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

namespace {

bool is_elementwise_unary(OpKind k) {
    switch (k) {
    case OpKind::relu:
    case OpKind::sigmoid:
    case OpKind::softplus:
    case OpKind::log:
    case OpKind::exp:
    case OpKind::square:
        return true;
    default:
        return false;
    }
}

double apply_unary(OpKind k, double x) {
    switch (k) {
    case OpKind::relu: return x > 0.0 ? x : 0.0;
    case OpKind::sigmoid: return sigmoid(x);
    case OpKind::softplus: return softplus(x);
    case OpKind::log: return std::log(x);
    case OpKind::exp: return std::exp(x);
    case OpKind::square: return x * x;
    default: return x;
    }
}

// Local derivative dy/dx given the argument x and the cached result y.
double unary_slope(OpKind k, double x, double y) {
    switch (k) {
    case OpKind::relu: return x > 0.0 ? 1.0 : 0.0;  // 0 at the kink
    case OpKind::sigmoid: return y * (1.0 - y);
    case OpKind::softplus: return sigmoid(x);
    case OpKind::log: return 1.0 / x;
    case OpKind::exp: return y;
    case OpKind::square: return 2.0 * x;
    default: return 1.0;
    }
}

Graph::Node make_node(OpKind kind, std::size_t lhs = 0, std::size_t rhs = 0) {
    Graph::Node n{};
    n.kind = kind;
    n.lhs = lhs;
    n.rhs = rhs;
    return n;
}

} // namespace

Eigen::Index TensorRef::rows() const { return graph_->nodes_.at(index_).rows; }
Eigen::Index TensorRef::cols() const { return graph_->nodes_.at(index_).cols; }

const Matrix& TensorRef::value() const {
    if (!graph_->evaluated_) {
        throw std::logic_error("graph has not been evaluated");
    }
    return graph_->nodes_.at(index_).value;
}

const Matrix& TensorRef::grad() const {
    if (!graph_->differentiated_) {
        throw std::logic_error("graph has not been differentiated");
    }
    return graph_->nodes_.at(index_).adjoint;
}

TensorRef Graph::push(Node node) {
    evaluated_ = false;
    differentiated_ = false;
    nodes_.push_back(std::move(node));
    return TensorRef(this, nodes_.size() - 1);
}

void Graph::check_owner(TensorRef t) const {
    if (&t.graph() != this || t.index() >= nodes_.size()) {
        throw std::invalid_argument("tensor belongs to a different graph");
    }
}

TensorRef Graph::input(Eigen::Index rows, Eigen::Index cols) {
    Node n = make_node(OpKind::input);
    n.rows = rows;
    n.cols = cols;
    return push(std::move(n));
}

TensorRef Graph::input(const Matrix& value) {
    TensorRef t = input(value.rows(), value.cols());
    assign(t, value);
    return t;
}

void Graph::assign(TensorRef t, const Matrix& value) {
    check_owner(t);
    Node& n = nodes_[t.index()];
    if (n.kind != OpKind::input) {
        throw std::invalid_argument("only input nodes can be assigned");
    }
    if (value.rows() != n.rows || value.cols() != n.cols) {
        throw std::invalid_argument("input value has the wrong shape");
    }
    n.value = value;
    n.assigned = true;
    evaluated_ = false;
    differentiated_ = false;
}

TensorRef Graph::constant(const Matrix& value) {
    Node n = make_node(OpKind::constant);
    n.rows = value.rows();
    n.cols = value.cols();
    n.value = value;
    return push(std::move(n));
}

TensorRef Graph::constant(Eigen::Index rows, Eigen::Index cols, double fill) {
    return constant(Matrix::Constant(rows, cols, fill));
}

TensorRef Graph::add(TensorRef a, TensorRef b) {
    check_owner(a);
    check_owner(b);
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument("add: shape mismatch");
    }
    Node n = make_node(OpKind::add, a.index(), b.index());
    n.rows = a.rows();
    n.cols = a.cols();
    return push(std::move(n));
}

TensorRef Graph::mul(TensorRef a, TensorRef b) {
    check_owner(a);
    check_owner(b);
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument("mul: shape mismatch");
    }
    Node n = make_node(OpKind::mul, a.index(), b.index());
    n.rows = a.rows();
    n.cols = a.cols();
    return push(std::move(n));
}

TensorRef Graph::matvec(TensorRef a, TensorRef b) {
    check_owner(a);
    check_owner(b);
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matvec: inner dimensions differ");
    }
    Node n = make_node(OpKind::matvec, a.index(), b.index());
    n.rows = a.rows();
    n.cols = b.cols();
    return push(std::move(n));
}

TensorRef Graph::unary(OpKind kind, TensorRef a) {
    check_owner(a);
    Node n = make_node(kind, a.index());
    n.rows = a.rows();
    n.cols = a.cols();
    return push(std::move(n));
}

TensorRef Graph::relu(TensorRef a) { return unary(OpKind::relu, a); }
TensorRef Graph::sigmoid(TensorRef a) { return unary(OpKind::sigmoid, a); }
TensorRef Graph::softplus(TensorRef a) { return unary(OpKind::softplus, a); }
TensorRef Graph::log(TensorRef a) { return unary(OpKind::log, a); }
TensorRef Graph::exp(TensorRef a) { return unary(OpKind::exp, a); }
TensorRef Graph::square(TensorRef a) { return unary(OpKind::square, a); }

TensorRef Graph::sum(TensorRef a) {
    check_owner(a);
    Node n = make_node(OpKind::sum, a.index());
    n.rows = 1;
    n.cols = 1;
    return push(std::move(n));
}

TensorRef Graph::scale(TensorRef a, double factor) {
    TensorRef t = unary(OpKind::scale, a);
    nodes_[t.index()].factor = factor;
    return t;
}

void Graph::forward() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        Node& n = nodes_[i];
        switch (n.kind) {
        case OpKind::input:
            if (!n.assigned) {
                throw std::invalid_argument("uninitialized input (node " + std::to_string(i) + ")");
            }
            break;
        case OpKind::constant:
            break;
        case OpKind::add:
            n.value = nodes_[n.lhs].value + nodes_[n.rhs].value;
            break;
        case OpKind::mul:
            n.value = nodes_[n.lhs].value.cwiseProduct(nodes_[n.rhs].value);
            break;
        case OpKind::matvec:
            n.value.noalias() = nodes_[n.lhs].value * nodes_[n.rhs].value;
            break;
        case OpKind::sum:
            n.value = Matrix::Constant(1, 1, nodes_[n.lhs].value.sum());
            break;
        case OpKind::scale:
            n.value = n.factor * nodes_[n.lhs].value;
            break;
        default: {
            const OpKind k = n.kind;
            n.value = nodes_[n.lhs].value.unaryExpr([k](double x) { return apply_unary(k, x); });
            break;
        }
        }
    }
    evaluated_ = true;
    differentiated_ = false;
}

void Graph::seed(TensorRef output) {
    check_owner(output);
    if (!evaluated_) {
        throw std::logic_error("backward called before forward");
    }
    if (!output.is_scalar()) {
        throw std::invalid_argument("backward output must be a scalar node");
    }
    for (Node& n : nodes_) {
        n.adjoint.setZero(n.rows, n.cols);
    }
    nodes_[output.index()].adjoint(0, 0) = 1.0;
}

// Pushes node i's adjoint to its parents. local_slope is only read for
// elementwise unary ops.
void Graph::propagate(std::size_t i, const Matrix& local_slope) {
    Node& n = nodes_[i];
    switch (n.kind) {
    case OpKind::input:
    case OpKind::constant:
        break;
    case OpKind::add:
        nodes_[n.lhs].adjoint += n.adjoint;
        nodes_[n.rhs].adjoint += n.adjoint;
        break;
    case OpKind::mul:
        nodes_[n.lhs].adjoint += n.adjoint.cwiseProduct(nodes_[n.rhs].value);
        nodes_[n.rhs].adjoint += n.adjoint.cwiseProduct(nodes_[n.lhs].value);
        break;
    case OpKind::matvec:
        nodes_[n.lhs].adjoint.noalias() += n.adjoint * nodes_[n.rhs].value.transpose();
        nodes_[n.rhs].adjoint.noalias() += nodes_[n.lhs].value.transpose() * n.adjoint;
        break;
    case OpKind::sum:
        nodes_[n.lhs].adjoint.array() += n.adjoint(0, 0);
        break;
    case OpKind::scale:
        nodes_[n.lhs].adjoint += n.factor * n.adjoint;
        break;
    default:
        nodes_[n.lhs].adjoint += n.adjoint.cwiseProduct(local_slope);
        break;
    }
}

void Graph::backward(TensorRef output) {
    seed(output);
    Matrix slope;
    for (std::size_t i = output.index() + 1; i-- > 0;) {
        const Node& n = nodes_[i];
        if (is_elementwise_unary(n.kind)) {
            const Matrix& x = nodes_[n.lhs].value;
            slope.resize(n.rows, n.cols);
            for (Eigen::Index k = 0; k < x.size(); ++k) {
                slope(k) = unary_slope(n.kind, x(k), n.value(k));
            }
        }
        propagate(i, slope);
    }
    differentiated_ = true;
}

void Graph::backward_rescale(TensorRef output, const Graph& reference) {
    if (!reference.evaluated_) {
        throw std::logic_error("reference graph has not been evaluated");
    }
    if (reference.nodes_.size() != nodes_.size()) {
        throw std::invalid_argument("reference graph differs in structure");
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& a = nodes_[i];
        const Node& b = reference.nodes_[i];
        if (a.kind != b.kind || a.lhs != b.lhs || a.rhs != b.rhs || a.rows != b.rows ||
            a.cols != b.cols) {
            throw std::invalid_argument("reference graph differs in structure");
        }
    }
    seed(output);
    Matrix slope;
    for (std::size_t i = output.index() + 1; i-- > 0;) {
        const Node& n = nodes_[i];
        if (is_elementwise_unary(n.kind)) {
            const Matrix& x = nodes_[n.lhs].value;
            const Matrix& x_ref = reference.nodes_[n.lhs].value;
            const Matrix& y_ref = reference.nodes_[i].value;
            slope.resize(n.rows, n.cols);
            for (Eigen::Index k = 0; k < x.size(); ++k) {
                const double dx = x(k) - x_ref(k);
                if (std::abs(dx) < kRescaleTolerance) {
                    slope(k) = unary_slope(n.kind, x(k), n.value(k));
                } else {
                    slope(k) = (n.value(k) - y_ref(k)) / dx;
                }
            }
        } else if (n.kind == OpKind::mul || n.kind == OpKind::matvec) {
            const bool lhs_moves = nodes_[n.lhs].value != reference.nodes_[n.lhs].value;
            const bool rhs_moves = nodes_[n.rhs].value != reference.nodes_[n.rhs].value;
            if (lhs_moves && rhs_moves && !n.adjoint.isZero(0.0)) {
                throw std::invalid_argument(
                    "rescale rule undefined for a product of two input-dependent operands (node " +
                    std::to_string(i) + ")");
            }
        }
        propagate(i, slope);
    }
    differentiated_ = true;
}

std::vector<std::pair<std::size_t, Matrix>> Graph::input_gradients() const {
    if (!differentiated_) {
        throw std::logic_error("graph has not been differentiated");
    }
    std::vector<std::pair<std::size_t, Matrix>> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].kind == OpKind::input) {
            out.emplace_back(i, nodes_[i].adjoint);
        }
    }
    return out;
}

TensorRef operator+(TensorRef a, TensorRef b) { return a.graph().add(a, b); }
TensorRef operator-(TensorRef a, TensorRef b) { return a.graph().add(a, a.graph().scale(b, -1.0)); }
TensorRef operator*(TensorRef a, TensorRef b) { return a.graph().mul(a, b); }
TensorRef operator*(double factor, TensorRef a) { return a.graph().scale(a, factor); }
TensorRef matvec(TensorRef a, TensorRef b) { return a.graph().matvec(a, b); }
TensorRef relu(TensorRef a) { return a.graph().relu(a); }
TensorRef sigmoid(TensorRef a) { return a.graph().sigmoid(a); }
TensorRef softplus(TensorRef a) { return a.graph().softplus(a); }
TensorRef log(TensorRef a) { return a.graph().log(a); }
TensorRef exp(TensorRef a) { return a.graph().exp(a); }
TensorRef square(TensorRef a) { return a.graph().square(a); }
TensorRef sum(TensorRef a) { return a.graph().sum(a); }

double grad_check(const ScalarBuilder& f, const Vector& x, double h) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("grad_check: step must be positive");
    }
    auto evaluate = [&f](const Vector& at) {
        Graph g;
        TensorRef in = g.input(Matrix(at));
        TensorRef out = f(g, in);
        g.forward();
        if (!out.is_scalar()) {
            throw std::invalid_argument("grad_check: function must be scalar-valued");
        }
        const double v = out.value()(0, 0);
        if (!std::isfinite(v)) {
            throw NumericError("grad_check: non-finite function value");
        }
        return v;
    };

    Graph g;
    TensorRef in = g.input(Matrix(x));
    TensorRef out = f(g, in);
    g.forward();
    if (!std::isfinite(out.value()(0, 0))) {
        throw NumericError("grad_check: non-finite function value");
    }
    g.backward(out);
    const Matrix analytic = in.grad();

    double worst = 0.0;
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe(i) = x(i) + h;
        const double up = evaluate(probe);
        probe(i) = x(i) - h;
        const double down = evaluate(probe);
        probe(i) = x(i);
        const double central = (up - down) / (2.0 * h);
        const double err = std::abs(analytic(i) - central) / std::max(1.0, std::abs(analytic(i)));
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace solarxai::autodiff
