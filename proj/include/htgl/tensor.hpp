#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "htgl/sparse.hpp"

namespace htgl {

/// Dense row-major tensor of doubles with optional gradient buffer.
/// Copying a Tensor copies the handle; the underlying buffer is shared.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double fill, bool requires_grad = false);
    static Tensor from(std::vector<std::size_t> shape, std::vector<double> value,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(d_); }
    const std::vector<std::size_t>& shape() const;
    std::size_t size() const;
    std::size_t rows() const;  // extent 0 (2-D)
    std::size_t cols() const;  // extent 1 (2-D)
    bool is_scalar() const;

    // Handle semantics: const-ness of the handle is shallow, so these return
    // mutable references to the shared buffer.
    std::vector<double>& value() const;
    double item() const;  // scalar tensors only

    double operator()(std::size_t i, std::size_t j) const;
    double& operator()(std::size_t i, std::size_t j);

    bool requires_grad() const;
    void set_requires_grad(bool on);
    std::vector<double>& grad() const;
    void zero_grad() const;

    /// True if the two handles share the same buffer.
    bool same_as(const Tensor& other) const { return d_ == other.d_; }

private:
    struct Data {
        std::vector<std::size_t> shape;
        std::vector<double> value;
        std::vector<double> grad;  // sized like value iff requires_grad
        bool requires_grad = false;
    };
    std::shared_ptr<Data> d_;
    explicit Tensor(std::shared_ptr<Data> d) : d_(std::move(d)) {}
};

enum class Activation { Elu, Sigmoid, Tanh, LeakyRelu };

/// Weights of one gated recurrent cell. Input extent d_in, hidden extent k.
/// W*: d_in x k, U*: k x k, b*: k.
struct GruParams {
    Tensor Wz, Uz, bz;
    Tensor Wr, Ur, br;
    Tensor Wh, Uh, bh;
};

/// Weights of one LSTM cell, gate order i, f, o, g.
struct LstmParams {
    Tensor Wi, Ui, bi;
    Tensor Wf, Uf, bf;
    Tensor Wo, Uo, bo;
    Tensor Wg, Ug, bg;
};

std::string shape_str(const std::vector<std::size_t>& shape);

/// Append-only record of one forward pass. Every op returns a fresh output
/// tensor and, when a gradient can flow, records a backward closure. The tape
/// is rebuilt per step; leaf tensors (parameters, data) live outside it and
/// keep their grads across backward calls until zero_grad.
class Tape {
public:
    // -- linear algebra --
    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor spmm(const SparseMatrix& adj, const Tensor& x);

    // -- elementwise --
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor scale_add(const Tensor& x, double a, double b);  // a*x + b
    Tensor activation(Activation kind, const Tensor& x);
    Tensor logsigmoid(const Tensor& x);

    /// x (n x d) plus bias b (d) added to every row.
    Tensor add_bias(const Tensor& x, const Tensor& b);
    /// x plus the idx-th entry of 1-D tensor v, added to every element.
    Tensor add_entry(const Tensor& x, const Tensor& v, std::size_t idx);

    // -- reductions / reshaping --
    Tensor sum_all(const Tensor& x);   // -> scalar
    Tensor mean_all(const Tensor& x);  // -> scalar
    Tensor stack_scalars(const std::vector<Tensor>& xs);  // -> [k]
    Tensor select(const Tensor& v, std::size_t idx);      // 1-D entry -> scalar
    Tensor broadcast_scalar(const Tensor& s, std::size_t rows, std::size_t cols);

    /// Numerically stable softmax over a 1-D tensor.
    Tensor softmax(const Tensor& v);

    /// sum_i w[i] * xs[i]; all xs share one shape, w is 1-D of matching length.
    Tensor weighted_sum(const std::vector<Tensor>& xs, const Tensor& w);
    /// sum_i W(i, col) * xs[i]; W is 2-D with rows() == xs.size().
    Tensor weighted_sum_col(const std::vector<Tensor>& xs, const Tensor& W, std::size_t col);

    // -- recurrent cells --
    Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p);
    /// Returns (h', c').
    std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c,
                                        const LstmParams& p);

    // -- pair / edge ops --
    /// Dot products h[i]·h[j] for each (i, j) pair; output is 1-D.
    Tensor pair_dot(const Tensor& h, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs);
    /// scores[e] = s_src[src_e] + s_dst[dst_e] for edge e; s_* are n x 1.
    Tensor edge_scores(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                       const Tensor& s_src, const Tensor& s_dst);
    /// Softmax of edge scores grouped by destination node.
    Tensor edge_softmax(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                        const Tensor& scores, std::size_t n_dst);
    /// out[dst_e] += coef[e] * h_src[src_e]; rows with no in-edges stay zero.
    Tensor edge_weighted_sum(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                             const Tensor& coef, const Tensor& h_src, std::size_t n_dst);
    /// out[i,:] = sum_j softmax_j(logits[j][i]) * values[j][i,:]. One logit
    /// column (n x 1) and one value block (n x d) per sequence position; the
    /// softmax runs per row across positions.
    Tensor attention_mix(const std::vector<Tensor>& logits, const std::vector<Tensor>& values);

    // -- losses (scalar outputs) --
    /// Summed negative log softmax probability of the true class, one term per
    /// (row, label) entry. Stable log-sum-exp per row.
    Tensor cross_entropy_sum(const Tensor& logits, const std::vector<std::size_t>& rows,
                             const std::vector<std::size_t>& labels);
    /// Mean absolute error against a constant target.
    Tensor mae(const Tensor& pred, const std::vector<double>& target);

    /// Reverse sweep from a scalar loss. Intermediate (tape-produced) grads are
    /// reset at the start of each sweep; leaf grads accumulate across calls
    /// until zero_grad.
    void backward(const Tensor& loss);

    void clear();
    std::size_t node_count() const { return nodes_.size(); }

    /// When set, every op output is checked for NaN/Inf and throws on failure.
    bool check_finite = false;

private:
    struct Node {
        std::function<void()> backward;
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> outputs_;  // tracked outputs, reset per sweep

    Tensor make_output(std::vector<std::size_t> shape, bool track);
    void record(std::function<void()> fn);
    void verify_finite(const Tensor& t, const char* op) const;
};

}  // namespace htgl
