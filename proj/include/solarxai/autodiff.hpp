#pragma once

// Reverse-mode automatic differentiation over dense float64 tensors.
//
// A Graph is an append-only tape. Every node stores its op, up to two parent
// indices (always smaller than its own index), a forward value and an adjoint.
// Graphs are cheap to build, so callers construct a fresh one per evaluation.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

namespace solarxai::autodiff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class OpKind {
    input,
    constant,
    add,
    mul,     // elementwise product
    matvec,  // matrix product; a vector is the one-column case
    relu,
    sigmoid,
    softplus,
    log,
    exp,
    square,
    sum,     // reduces all entries to a 1x1 tensor
    scale,   // multiplies by a fixed scalar
};

std::string_view to_string(OpKind kind) noexcept;

class Graph;

/// Handle to one tensor-valued node of a Graph.
class TensorRef {
public:
    TensorRef() = default;
    TensorRef(Graph* graph, std::size_t index) : graph_(graph), index_(index) {}

    Graph& graph() const { return *graph_; }
    std::size_t index() const noexcept { return index_; }
    Eigen::Index rows() const;
    Eigen::Index cols() const;
    bool is_scalar() const { return rows() == 1 && cols() == 1; }

    /// Forward value; valid after Graph::forward().
    const Matrix& value() const;
    /// Adjoint; valid after Graph::backward().
    const Matrix& grad() const;

private:
    Graph* graph_ = nullptr;
    std::size_t index_ = 0;
};

class Graph {
public:
    struct Node {
        OpKind kind;
        std::size_t lhs = 0;
        std::size_t rhs = 0;
        double factor = 1.0;  // scale only
        Eigen::Index rows = 0;
        Eigen::Index cols = 0;
        bool assigned = false;  // input only
        Matrix value;
        Matrix adjoint;
    };

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    TensorRef input(Eigen::Index rows, Eigen::Index cols);
    TensorRef input(const Matrix& value);
    void assign(TensorRef node, const Matrix& value);
    TensorRef constant(const Matrix& value);
    TensorRef constant(Eigen::Index rows, Eigen::Index cols, double fill);

    TensorRef add(TensorRef a, TensorRef b);
    TensorRef mul(TensorRef a, TensorRef b);
    TensorRef matvec(TensorRef a, TensorRef b);
    TensorRef relu(TensorRef a);
    TensorRef sigmoid(TensorRef a);
    TensorRef softplus(TensorRef a);
    TensorRef log(TensorRef a);
    TensorRef exp(TensorRef a);
    TensorRef square(TensorRef a);
    TensorRef sum(TensorRef a);
    TensorRef scale(TensorRef a, double factor);

    /// Evaluates every node in index order. Throws if an input is unassigned.
    void forward();

    /// Seeds d(output)/d(output) = 1 and accumulates adjoints down the tape.
    /// Requires forward() and a 1x1 output.
    void backward(TensorRef output);

    /// DeepLIFT-Rescale pass. `reference` must be a structurally identical
    /// graph evaluated at the baseline. Elementwise nonlinearities use the
    /// multiplier (y - y_ref) / (x - x_ref), falling back to the exact local
    /// derivative where |x - x_ref| < kRescaleTolerance. Linear ops propagate
    /// as in backward(). A product whose two operands both differ from the
    /// reference has no rescale rule and is rejected.
    void backward_rescale(TensorRef output, const Graph& reference);

    static constexpr double kRescaleTolerance = 1e-7;

    std::size_t size() const noexcept { return nodes_.size(); }
    const Node& node(std::size_t i) const { return nodes_.at(i); }
    bool evaluated() const noexcept { return evaluated_; }

    /// Adjoints of every input node, keyed by node index.
    std::vector<std::pair<std::size_t, Matrix>> input_gradients() const;

private:
    friend class TensorRef;

    TensorRef push(Node node);
    TensorRef unary(OpKind kind, TensorRef a);
    void check_owner(TensorRef t) const;
    void seed(TensorRef output);
    void propagate(std::size_t i, const Matrix& local_slope);

    std::vector<Node> nodes_;
    bool evaluated_ = false;
    bool differentiated_ = false;
};

TensorRef operator+(TensorRef a, TensorRef b);
TensorRef operator-(TensorRef a, TensorRef b);
TensorRef operator*(TensorRef a, TensorRef b);  // elementwise
TensorRef operator*(double factor, TensorRef a);
TensorRef matvec(TensorRef a, TensorRef b);
TensorRef relu(TensorRef a);
TensorRef sigmoid(TensorRef a);
TensorRef softplus(TensorRef a);
TensorRef log(TensorRef a);
TensorRef exp(TensorRef a);
TensorRef square(TensorRef a);
TensorRef sum(TensorRef a);

/// Elementwise helpers shared with code that evaluates networks directly.
double sigmoid(double z) noexcept;
double softplus(double z) noexcept;

/// Builds a scalar-valued function of a single column-vector input.
using ScalarBuilder = std::function<TensorRef(Graph&, TensorRef)>;

/// max_i |analytic_i - central_i| / max(1, |analytic_i|), where the analytic
/// gradient comes from backward() and central_i from f(x +- h e_i).
double grad_check(const ScalarBuilder& f, const Vector& x, double h);

} // namespace solarxai::autodiff
