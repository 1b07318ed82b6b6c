#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

// Reverse-mode automatic differentiation over dense 2-D double arrays.
//
// Arrays are immutable values; operations on tape-bound arrays append nodes
// to the owning Tape. Backward passes build their vector-Jacobian products
// out of the same taped operations, so a gradient is itself a differentiable
// array -- that is what lets a penalty on a gradient norm be minimized with
// respect to the parameters that produced the gradient. Nesting is capped at
// gradient-of-gradient; a third level is rejected when requested.
//
// A Tape is confined to one thread. Arrays are safe to share read-only.

namespace sparseprior::grad {

struct Shape {
    long rows = 0;
    long cols = 0;
    long size() const { return rows * cols; }
    bool operator==(const Shape&) const = default;
};

std::string to_string(Shape s);

class Tape;

class Array {
public:
    Array() = default;
    Array(Shape shape, std::vector<double> values);  // constant (no tape node)
    static Array constant(Shape shape, double fill);
    static Array scalar(double v);

    bool empty() const { return data_ == nullptr; }
    const std::vector<double>& values() const { return *data_; }
    Shape shape() const { return shape_; }
    long rows() const { return shape_.rows; }
    long cols() const { return shape_.cols; }
    long size() const { return shape_.size(); }
    double item() const;  // requires a one-element array
    double operator()(long r, long c) const { return (*data_)[r * shape_.cols + c]; }

    bool on_tape() const { return node_ >= 0; }
    int node() const { return node_; }
    Tape* tape() const { return tape_; }
    Array detach() const;  // same values, no tape node

private:
    friend class Tape;
    std::shared_ptr<const std::vector<double>> data_;
    Shape shape_{};
    Tape* tape_ = nullptr;
    int node_ = -1;
};

// Given the node's cotangent, produce cotangents for the parents whose slot
// is flagged in `need` (others may be left empty).
using Vjp = std::function<std::vector<Array>(const Array& cot, const std::vector<char>& need)>;
// Builds the Vjp once the output array (with its node id) exists.
using VjpBuilder = std::function<Vjp(const Array& out)>;

class Tape {
public:
    // A differentiable input. Gradients are reported for leaves (and for any
    // interior node) passed to gradient().
    Array leaf(Shape shape, std::vector<double> values);
    Array leaf(const Array& constant_source);

    Array record(Shape shape, std::vector<double> values, const std::vector<Array>& parents,
                 const VjpBuilder& make_vjp, const char* op_name);

    // d(output)/d(wrt[i]) for a one-element output. Unreachable entries and
    // plain constants get zero arrays. The results are recorded on this tape
    // and can be differentiated one more time.
    std::vector<Array> gradient(const Array& output, std::span<const Array> wrt);

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        std::vector<int> parents;
        Vjp vjp;  // null for leaves
        int grad_level = 0;
        const char* op = "leaf";
    };
    std::vector<Node> nodes_;
    int recording_level_ = 0;
};

// ---- primitive operations -------------------------------------------------
// Binary elementwise ops broadcast a length-1 row and/or column axis.

Array add(const Array& a, const Array& b);
Array sub(const Array& a, const Array& b);
Array mul(const Array& a, const Array& b);
Array div(const Array& a, const Array& b);
Array matmul(const Array& a, const Array& b, bool transpose_a = false, bool transpose_b = false);

Array neg(const Array& a);
Array scale(const Array& a, double c);
Array add_scalar(const Array& a, double c);

Array exp(const Array& a);
Array log(const Array& a);
Array log1p(const Array& a);
Array sqrt(const Array& a);
Array square(const Array& a);
Array sin(const Array& a);
Array cos(const Array& a);
Array lgamma(const Array& a);
Array digamma(const Array& a);  // derivative of lgamma; has no gradient rule itself

Array softplus(const Array& a);
Array sigmoid(const Array& a);
Array leaky_relu(const Array& a, double negative_slope = 0.2);
Array softmax_rows(const Array& a);
Array l2norm_rows(const Array& a);    // m x n -> m x 1; gradient at a zero row is 0
Array recip_or_zero(const Array& a);  // 1/x with 0 at x == 0

Array sum(const Array& a);   // -> 1 x 1
Array mean(const Array& a);  // -> 1 x 1
Array row_sum(const Array& a);  // m x n -> m x 1
Array col_sum(const Array& a);  // m x n -> 1 x n

Array broadcast_to(const Array& a, Shape shape);
Array slice_cols(const Array& a, long col_begin, long col_end);
Array pad_cols(const Array& a, long col_begin, long total_cols);

// Differentiates a function of a gradient: computes g = d(inner)/d(wrt_inner)
// with the backward pass recorded, applies `outer` to g, and returns
// d(outer(g))/d(params[i]). Fails for ops without a second-derivative rule.
std::vector<Array> grad_nested(Tape& tape, const Array& inner_scalar, const Array& wrt_inner,
                               const std::function<Array(const Array&)>& outer,
                               std::span<const Array> params);

}  // namespace sparseprior::grad
