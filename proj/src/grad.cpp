#include "sparseprior/grad.hpp"

#include <cmath>
#include <stdexcept>

#include "sparseprior/kernels.hpp"
#include "sparseprior/special.hpp"

namespace sparseprior::grad {

std::string to_string(Shape s) {
    return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

Array::Array(Shape shape, std::vector<double> values) : shape_(shape) {
    if (static_cast<long>(values.size()) != shape.size())
        throw std::invalid_argument("Array: data length " + std::to_string(values.size()) +
                                    " does not match shape " + to_string(shape));
    data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Array Array::constant(Shape shape, double fill) {
    return Array(shape, std::vector<double>(static_cast<std::size_t>(shape.size()), fill));
}

Array Array::scalar(double v) { return Array({1, 1}, {v}); }

double Array::item() const {
    if (size() != 1) throw std::invalid_argument("item: array has " + std::to_string(size()) +
                                                 " elements, expected exactly one");
    return (*data_)[0];
}

Array Array::detach() const {
    Array out;
    out.data_ = data_;
    out.shape_ = shape_;
    return out;
}

// ---- tape -------------------------------------------------------------------

Array Tape::leaf(Shape shape, std::vector<double> values) {
    Array out(shape, std::move(values));
    out.tape_ = this;
    out.node_ = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{{}, nullptr, recording_level_, "leaf"});
    return out;
}

Array Tape::leaf(const Array& constant_source) {
    Array out = constant_source.detach();
    out.tape_ = this;
    out.node_ = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{{}, nullptr, recording_level_, "leaf"});
    return out;
}

Array Tape::record(Shape shape, std::vector<double> values, const std::vector<Array>& parents,
                   const VjpBuilder& make_vjp, const char* op_name) {
    std::vector<int> ids;
    ids.reserve(parents.size());
    for (const auto& p : parents) {
        if (p.on_tape() && p.tape() != this)
            throw std::invalid_argument(std::string(op_name) + ": parents live on different tapes");
        ids.push_back(p.on_tape() ? p.node() : -1);
    }
    Array out(shape, std::move(values));
    out.tape_ = this;
    out.node_ = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{std::move(ids), nullptr, recording_level_, op_name});
    nodes_.back().vjp = make_vjp(out);
    return out;
}

std::vector<Array> Tape::gradient(const Array& output, std::span<const Array> wrt) {
    if (output.size() != 1)
        throw std::invalid_argument("gradient: output must have exactly one element, got " +
                                    to_string(output.shape()));
    auto zeros_for = [&] {
        std::vector<Array> zs;
        zs.reserve(wrt.size());
        for (const auto& w : wrt) zs.push_back(Array::constant(w.shape(), 0.0));
        return zs;
    };
    if (!output.on_tape()) return zeros_for();  // constant graph: all-zero gradients
    if (output.tape() != this)
        throw std::invalid_argument("gradient: output recorded on a different tape");

    const int out_id = output.node();
    for (const auto& w : wrt)
        if (w.on_tape() && w.tape() != this)
            throw std::invalid_argument("gradient: wrt array recorded on a different tape");

    // Downward closure of the output (through parents).
    std::vector<char> down(static_cast<std::size_t>(out_id) + 1, 0);
    {
        std::vector<int> stack{out_id};
        down[out_id] = 1;
        while (!stack.empty()) {
            const int id = stack.back();
            stack.pop_back();
            for (int p : nodes_[id].parents)
                if (p >= 0 && !down[p]) {
                    down[p] = 1;
                    stack.push_back(p);
                }
        }
    }

    int max_level = 0;
    for (int id = 0; id <= out_id; ++id)
        if (down[id]) max_level = std::max(max_level, nodes_[id].grad_level);
    const int pass_level = max_level + 1;
    if (pass_level > 2)
        throw std::logic_error(
            "gradient: nesting deeper than gradient-of-gradient is not supported");

    // A node is useful when some requested array is reachable below it.
    std::vector<char> useful(static_cast<std::size_t>(out_id) + 1, 0);
    for (const auto& w : wrt)
        if (w.on_tape() && w.node() <= out_id) useful[w.node()] = 1;
    for (int id = 0; id <= out_id; ++id) {
        if (useful[id]) continue;
        for (int p : nodes_[id].parents)
            if (p >= 0 && useful[p]) {
                useful[id] = 1;
                break;
            }
    }

    std::vector<Array> cot(static_cast<std::size_t>(out_id) + 1);
    cot[out_id] = Array::scalar(1.0);

    const int saved_level = recording_level_;
    recording_level_ = pass_level;
    try {
        for (int id = out_id; id >= 0; --id) {
            if (!down[id] || !useful[id] || cot[id].empty()) continue;
            // The vjp records fresh nodes on this tape, which may reallocate
            // nodes_; work from copies, not references.
            const std::vector<int> parents = nodes_[id].parents;
            const Vjp vjp = nodes_[id].vjp;
            if (!vjp) continue;  // leaf
            std::vector<char> need(parents.size(), 0);
            bool any = false;
            for (std::size_t i = 0; i < parents.size(); ++i) {
                need[i] = (parents[i] >= 0 && useful[parents[i]]) ? 1 : 0;
                any = any || need[i];
            }
            if (!any) continue;
            std::vector<Array> pcots = vjp(cot[id], need);
            for (std::size_t i = 0; i < parents.size(); ++i) {
                if (!need[i] || i >= pcots.size() || pcots[i].empty()) continue;
                const int p = parents[i];
                cot[p] = cot[p].empty() ? pcots[i] : add(cot[p], pcots[i]);
            }
        }
    } catch (...) {
        recording_level_ = saved_level;
        throw;
    }
    recording_level_ = saved_level;

    std::vector<Array> result;
    result.reserve(wrt.size());
    for (const auto& w : wrt) {
        if (w.on_tape() && w.node() <= out_id && !cot[w.node()].empty())
            result.push_back(cot[w.node()]);
        else
            result.push_back(Array::constant(w.shape(), 0.0));
    }
    return result;
}

// ---- op plumbing ------------------------------------------------------------

namespace {

Array make(Shape shape, std::vector<double> values, const std::vector<Array>& parents,
           const VjpBuilder& make_vjp, const char* op) {
    Tape* t = nullptr;
    for (const auto& p : parents) {
        if (!p.on_tape()) continue;
        if (t && t != p.tape())
            throw std::invalid_argument(std::string(op) + ": parents live on different tapes");
        t = p.tape();
    }
    if (!t) return Array(shape, std::move(values));
    return t->record(shape, std::move(values), parents, make_vjp, op);
}

Shape broadcast_shape(const Array& a, const Array& b, const char* op) {
    auto pick = [&](long x, long y) -> long {
        if (x == y) return x;
        if (x == 1) return y;
        if (y == 1) return x;
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                                    " vs " + to_string(b.shape()));
    };
    return Shape{pick(a.rows(), b.rows()), pick(a.cols(), b.cols())};
}

Array expand(const Array& a, Shape s) { return a.shape() == s ? a : broadcast_to(a, s); }

template <class F>
Array unary_op(const Array& a, const char* op, F f, const VjpBuilder& make_vjp) {
    std::vector<double> out(static_cast<std::size_t>(a.size()));
    kern::map_unary(out.size(), a.values().data(), out.data(), f);
    return make(a.shape(), std::move(out), {a}, make_vjp, op);
}

template <class F>
Array binary_same_shape(const Array& a, const Array& b, const char* op, F f,
                        const VjpBuilder& make_vjp) {
    std::vector<double> out(static_cast<std::size_t>(a.size()));
    kern::map_binary(out.size(), a.values().data(), b.values().data(), out.data(), f);
    return make(a.shape(), std::move(out), {a, b}, make_vjp, op);
}

const Vjp no_grad_rule = [](const Array&, const std::vector<char>&) -> std::vector<Array> {
    throw std::logic_error("digamma: no registered second-derivative rule for lgamma");
};

}  // namespace

// ---- arithmetic ---------------------------------------------------------------

Array add(const Array& a, const Array& b) {
    const Shape s = broadcast_shape(a, b, "add");
    const Array A = expand(a, s), B = expand(b, s);
    return binary_same_shape(A, B, "add", [](double x, double y) { return x + y; },
                             [](const Array&) -> Vjp {
                                 return [](const Array& cot, const std::vector<char>&) {
                                     return std::vector<Array>{cot, cot};
                                 };
                             });
}

Array sub(const Array& a, const Array& b) {
    const Shape s = broadcast_shape(a, b, "sub");
    const Array A = expand(a, s), B = expand(b, s);
    return binary_same_shape(A, B, "sub", [](double x, double y) { return x - y; },
                             [](const Array&) -> Vjp {
                                 return [](const Array& cot, const std::vector<char>& need) {
                                     std::vector<Array> g(2);
                                     if (need[0]) g[0] = cot;
                                     if (need[1]) g[1] = neg(cot);
                                     return g;
                                 };
                             });
}

Array mul(const Array& a, const Array& b) {
    const Shape s = broadcast_shape(a, b, "mul");
    const Array A = expand(a, s), B = expand(b, s);
    return binary_same_shape(A, B, "mul", [](double x, double y) { return x * y; },
                             [A, B](const Array&) -> Vjp {
                                 return [A, B](const Array& cot, const std::vector<char>& need) {
                                     std::vector<Array> g(2);
                                     if (need[0]) g[0] = mul(cot, B);
                                     if (need[1]) g[1] = mul(cot, A);
                                     return g;
                                 };
                             });
}

Array div(const Array& a, const Array& b) {
    const Shape s = broadcast_shape(a, b, "div");
    const Array A = expand(a, s), B = expand(b, s);
    for (double v : B.values())
        if (v == 0.0) throw std::domain_error("div: division by zero");
    return binary_same_shape(A, B, "div", [](double x, double y) { return x / y; },
                             [A, B](const Array& out) -> Vjp {
                                 return [A, B, out](const Array& cot,
                                                    const std::vector<char>& need) {
                                     std::vector<Array> g(2);
                                     if (need[0]) g[0] = div(cot, B);
                                     if (need[1]) g[1] = neg(div(mul(cot, out), B));
                                     return g;
                                 };
                             });
}

Array matmul(const Array& a, const Array& b, bool ta, bool tb) {
    if (ta && tb) throw std::invalid_argument("matmul: double transpose is unsupported");
    const long m = ta ? a.cols() : a.rows();
    const long k = ta ? a.rows() : a.cols();
    const long kb = tb ? b.cols() : b.rows();
    const long n = tb ? b.rows() : b.cols();
    if (k != kb)
        throw std::invalid_argument("matmul: inner dimensions differ, " + to_string(a.shape()) +
                                    (ta ? "^T" : "") + " * " + to_string(b.shape()) +
                                    (tb ? "^T" : ""));
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    kern::gemm(ta, tb, m, n, k, a.values().data(), b.values().data(), out.data());
    return make({m, n}, std::move(out), {a, b},
                [a, b, ta, tb](const Array&) -> Vjp {
                    return [a, b, ta, tb](const Array& cot, const std::vector<char>& need) {
                        std::vector<Array> g(2);
                        if (!ta && !tb) {
                            if (need[0]) g[0] = matmul(cot, b, false, true);
                            if (need[1]) g[1] = matmul(a, cot, true, false);
                        } else if (!ta && tb) {
                            if (need[0]) g[0] = matmul(cot, b, false, false);
                            if (need[1]) g[1] = matmul(cot, a, true, false);
                        } else {  // ta && !tb
                            if (need[0]) g[0] = matmul(b, cot, false, true);
                            if (need[1]) g[1] = matmul(a, cot, false, false);
                        }
                        return g;
                    };
                },
                "matmul");
}

Array neg(const Array& a) {
    return unary_op(a, "neg", [](double x) { return -x; }, [](const Array&) -> Vjp {
        return [](const Array& cot, const std::vector<char>&) {
            return std::vector<Array>{neg(cot)};
        };
    });
}

Array scale(const Array& a, double c) {
    return unary_op(a, "scale", [c](double x) { return c * x; }, [c](const Array&) -> Vjp {
        return [c](const Array& cot, const std::vector<char>&) {
            return std::vector<Array>{scale(cot, c)};
        };
    });
}

Array add_scalar(const Array& a, double c) {
    return unary_op(a, "add_scalar", [c](double x) { return x + c; }, [](const Array&) -> Vjp {
        return [](const Array& cot, const std::vector<char>&) {
            return std::vector<Array>{cot};
        };
    });
}

// ---- transcendental -----------------------------------------------------------

Array exp(const Array& a) {
    return unary_op(a, "exp", [](double x) { return std::exp(x); }, [](const Array& out) -> Vjp {
        return [out](const Array& cot, const std::vector<char>&) {
            return std::vector<Array>{mul(cot, out)};
        };
    });
}

Array log(const Array& a) {
    for (double v : a.values())
        if (!(v > 0.0)) throw std::domain_error("log: argument must be positive");
    return unary_op(a, "log", [](double x) { return std::log(x); }, [a](const Array&) -> Vjp {
        return [a](const Array& cot, const std::vector<char>&) {
            return std::vector<Array>{div(cot, a)};
        };
    });
}

Array log1p(const Array& a) {
    for (double v : a.values())
        if (!(v > -1.0)) throw std::domain_error("log1p: argument must exceed -1");
    return unary_op(a, "log1p", [](double x) { return std::log1p(x); }, [a](const Array&) -> Vjp {
        return [a](const Array& cot, const std::vector<char>&) {
            return std::vector<Array>{div(cot, add_scalar(a, 1.0))};
        };
    });
}

Array sqrt(const Array& a) {
    for (double v : a.values())
        if (v < 0.0) throw std::domain_error("sqrt: negative argument");
    return unary_op(a, "sqrt", [](double x) { return std::sqrt(x); }, [](const Array& out) -> Vjp {
        return [out](const Array& cot, const std::vector<char>&) {
            return std::vector<Array>{div(cot, scale(out, 2.0))};
        };
    });
}

Array square(const Array& a) {
    return unary_op(a, "square", [](double x) { return x * x; }, [a](const Array&) -> Vjp {
        return [a](const Array& cot, const std::vector<char>&) {
            return std::vector<Array>{mul(cot, scale(a, 2.0))};
        };
    });
}

Array sin(const Array& a) {
    return unary_op(a, "sin", [](double x) { return std::sin(x); }, [a](const Array&) -> Vjp {
        return [a](const Array& cot, const std::vector<char>&) {
            return std::vector<Array>{mul(cot, cos(a))};
        };
    });
}

Array cos(const Array& a) {
    return unary_op(a, "cos", [](double x) { return std::cos(x); }, [a](const Array&) -> Vjp {
        return [a](const Array& cot, const std::vector<char>&) {
            return std::vector<Array>{neg(mul(cot, sin(a)))};
        };
    });
}

Array lgamma(const Array& a) {
    return unary_op(a, "lgamma", [](double x) { return special::lgamma_pos(x); },
                    [a](const Array&) -> Vjp {
                        return [a](const Array& cot, const std::vector<char>&) {
                            return std::vector<Array>{mul(cot, digamma(a))};
                        };
                    });
}

Array digamma(const Array& a) {
    return unary_op(a, "digamma", [](double x) { return special::digamma(x); },
                    [](const Array&) -> Vjp { return no_grad_rule; });
}

// ---- neural-net pointwise -------------------------------------------------------

Array softplus(const Array& a) {
    // overflow-safe form: max(x, 0) + log1p(exp(-|x|))
    return unary_op(a, "softplus",
                    [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
                    [a](const Array&) -> Vjp {
                        return [a](const Array& cot, const std::vector<char>&) {
                            return std::vector<Array>{mul(cot, sigmoid(a))};
                        };
                    });
}

Array sigmoid(const Array& a) {
    return unary_op(a, "sigmoid",
                    [](double x) {
                        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                        : std::exp(x) / (1.0 + std::exp(x));
                    },
                    [](const Array& out) -> Vjp {
                        return [out](const Array& cot, const std::vector<char>&) {
                            // y * (1 - y)
                            return std::vector<Array>{
                                mul(cot, mul(out, add_scalar(neg(out), 1.0)))};
                        };
                    });
}

Array leaky_relu(const Array& a, double negative_slope) {
    std::vector<double> mask_v(static_cast<std::size_t>(a.size()));
    const auto& av = a.values();
    for (std::size_t i = 0; i < mask_v.size(); ++i) mask_v[i] = av[i] > 0.0 ? 1.0 : negative_slope;
    Array mask(a.shape(), std::move(mask_v));
    return unary_op(a, "leaky_relu",
                    [negative_slope](double x) { return x > 0.0 ? x : negative_slope * x; },
                    [mask](const Array&) -> Vjp {
                        return [mask](const Array& cot, const std::vector<char>&) {
                            return std::vector<Array>{mul(cot, mask)};
                        };
                    });
}

Array softmax_rows(const Array& a) {
    std::vector<double> out(static_cast<std::size_t>(a.size()));
    kern::softmax_rows(a.rows(), a.cols(), a.values().data(), out.data());
    return make(a.shape(), std::move(out), {a},
                [](const Array& out_arr) -> Vjp {
                    return [out_arr](const Array& cot, const std::vector<char>&) {
                        const Array inner = row_sum(mul(cot, out_arr));  // m x 1
                        return std::vector<Array>{
                            mul(out_arr, sub(cot, broadcast_to(inner, out_arr.shape())))};
                    };
                },
                "softmax_rows");
}

Array l2norm_rows(const Array& a) {
    std::vector<double> out(static_cast<std::size_t>(a.rows()));
    kern::l2norm_rows(a.rows(), a.cols(), a.values().data(), out.data());
    return make({a.rows(), 1}, std::move(out), {a},
                [a](const Array& out_arr) -> Vjp {
                    return [a, out_arr](const Array& cot, const std::vector<char>&) {
                        // d||x||/dx = x / ||x||, defined as 0 on a zero row.
                        const Array inv = recip_or_zero(out_arr);
                        return std::vector<Array>{
                            mul(a, broadcast_to(mul(cot, inv), a.shape()))};
                    };
                },
                "l2norm_rows");
}

Array recip_or_zero(const Array& a) {
    return unary_op(a, "recip_or_zero", [](double x) { return x == 0.0 ? 0.0 : 1.0 / x; },
                    [](const Array& out) -> Vjp {
                        return [out](const Array& cot, const std::vector<char>&) {
                            return std::vector<Array>{neg(mul(cot, square(out)))};
                        };
                    });
}

// ---- reductions / shape ---------------------------------------------------------

Array sum(const Array& a) {
    const double total = kern::sum_blocked(a.values().data(), a.values().size());
    const Shape src = a.shape();
    return make({1, 1}, {total}, {a},
                [src](const Array&) -> Vjp {
                    return [src](const Array& cot, const std::vector<char>&) {
                        return std::vector<Array>{broadcast_to(cot, src)};
                    };
                },
                "sum");
}

Array mean(const Array& a) {
    if (a.size() == 0) throw std::invalid_argument("mean: empty array");
    const double total = kern::sum_blocked(a.values().data(), a.values().size());
    const Shape src = a.shape();
    const double inv_n = 1.0 / static_cast<double>(a.size());
    return make({1, 1}, {total * inv_n}, {a},
                [src, inv_n](const Array&) -> Vjp {
                    return [src, inv_n](const Array& cot, const std::vector<char>&) {
                        return std::vector<Array>{broadcast_to(scale(cot, inv_n), src)};
                    };
                },
                "mean");
}

Array row_sum(const Array& a) {
    std::vector<double> out(static_cast<std::size_t>(a.rows()));
    kern::row_sum(a.rows(), a.cols(), a.values().data(), out.data());
    const Shape src = a.shape();
    return make({a.rows(), 1}, std::move(out), {a},
                [src](const Array&) -> Vjp {
                    return [src](const Array& cot, const std::vector<char>&) {
                        return std::vector<Array>{broadcast_to(cot, src)};
                    };
                },
                "row_sum");
}

Array col_sum(const Array& a) {
    std::vector<double> out(static_cast<std::size_t>(a.cols()));
    kern::col_sum(a.rows(), a.cols(), a.values().data(), out.data());
    const Shape src = a.shape();
    return make({1, a.cols()}, std::move(out), {a},
                [src](const Array&) -> Vjp {
                    return [src](const Array& cot, const std::vector<char>&) {
                        return std::vector<Array>{broadcast_to(cot, src)};
                    };
                },
                "col_sum");
}

Array broadcast_to(const Array& a, Shape shape) {
    if (a.shape() == shape) return a;
    const bool rows_ok = a.rows() == shape.rows || a.rows() == 1;
    const bool cols_ok = a.cols() == shape.cols || a.cols() == 1;
    if (!rows_ok || !cols_ok)
        throw std::invalid_argument("broadcast_to: cannot expand " + to_string(a.shape()) +
                                    " to " + to_string(shape));
    std::vector<double> out(static_cast<std::size_t>(shape.size()));
    const auto& av = a.values();
    const long ar = a.rows(), ac = a.cols();
    for (long i = 0; i < shape.rows; ++i) {
        const long si = ar == 1 ? 0 : i;
        for (long j = 0; j < shape.cols; ++j) {
            const long sj = ac == 1 ? 0 : j;
            out[i * shape.cols + j] = av[si * ac + sj];
        }
    }
    const Shape src = a.shape();
    return make(shape, std::move(out), {a},
                [src](const Array&) -> Vjp {
                    return [src](const Array& cot, const std::vector<char>&) {
                        Array r = cot;
                        if (src.rows == 1 && r.rows() > 1) r = col_sum(r);
                        if (src.cols == 1 && r.cols() > 1) r = row_sum(r);
                        return std::vector<Array>{r};
                    };
                },
                "broadcast_to");
}

Array slice_cols(const Array& a, long col_begin, long col_end) {
    if (col_begin < 0 || col_end > a.cols() || col_begin >= col_end)
        throw std::invalid_argument("slice_cols: bad column range");
    const long w = col_end - col_begin;
    std::vector<double> out(static_cast<std::size_t>(a.rows()) * w);
    const auto& av = a.values();
    for (long i = 0; i < a.rows(); ++i)
        for (long j = 0; j < w; ++j) out[i * w + j] = av[i * a.cols() + col_begin + j];
    const long total = a.cols();
    return make({a.rows(), w}, std::move(out), {a},
                [col_begin, total](const Array&) -> Vjp {
                    return [col_begin, total](const Array& cot, const std::vector<char>&) {
                        return std::vector<Array>{pad_cols(cot, col_begin, total)};
                    };
                },
                "slice_cols");
}

Array pad_cols(const Array& a, long col_begin, long total_cols) {
    if (col_begin < 0 || col_begin + a.cols() > total_cols)
        throw std::invalid_argument("pad_cols: range exceeds target width");
    std::vector<double> out(static_cast<std::size_t>(a.rows()) * total_cols, 0.0);
    const auto& av = a.values();
    for (long i = 0; i < a.rows(); ++i)
        for (long j = 0; j < a.cols(); ++j) out[i * total_cols + col_begin + j] = av[i * a.cols() + j];
    const long w = a.cols();
    return make({a.rows(), total_cols}, std::move(out), {a},
                [col_begin, w](const Array&) -> Vjp {
                    return [col_begin, w](const Array& cot, const std::vector<char>&) {
                        return std::vector<Array>{slice_cols(cot, col_begin, col_begin + w)};
                    };
                },
                "pad_cols");
}

std::vector<Array> grad_nested(Tape& tape, const Array& inner_scalar, const Array& wrt_inner,
                               const std::function<Array(const Array&)>& outer,
                               std::span<const Array> params) {
    const Array g = tape.gradient(inner_scalar, std::vector<Array>{wrt_inner})[0];
    Array out = outer(g);
    if (out.size() != 1) out = sum(out);
    return tape.gradient(out, params);
}

}  // namespace sparseprior::grad
