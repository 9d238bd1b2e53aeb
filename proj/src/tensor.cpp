#include "htgl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace htgl {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double ex = std::exp(x);
    return ex / (1.0 + ex);
}

}  // namespace

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += " x ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double fill, bool requires_grad) {
    auto d = std::make_shared<Data>();
    d->shape = std::move(shape);
    d->value.assign(shape_product(d->shape), fill);
    d->requires_grad = requires_grad;
    if (requires_grad) d->grad.assign(d->value.size(), 0.0);
    return Tensor(std::move(d));
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> value, bool requires_grad) {
    if (shape_product(shape) != value.size()) {
        throw std::invalid_argument("tensor data length " + std::to_string(value.size()) +
                                    " does not match shape " + shape_str(shape));
    }
    auto d = std::make_shared<Data>();
    d->shape = std::move(shape);
    d->value = std::move(value);
    d->requires_grad = requires_grad;
    if (requires_grad) d->grad.assign(d->value.size(), 0.0);
    return Tensor(std::move(d));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

const std::vector<std::size_t>& Tensor::shape() const { return d_->shape; }
std::size_t Tensor::size() const { return d_->value.size(); }

std::size_t Tensor::rows() const {
    return d_->shape.empty() ? 1 : d_->shape[0];
}

std::size_t Tensor::cols() const {
    return d_->shape.size() < 2 ? (d_->shape.empty() ? 1 : d_->shape[0]) : d_->shape[1];
}

bool Tensor::is_scalar() const { return size() == 1; }

std::vector<double>& Tensor::value() const { return d_->value; }

double Tensor::item() const {
    if (!is_scalar()) {
        throw std::invalid_argument("item() on non-scalar tensor of shape " + shape_str(d_->shape));
    }
    return d_->value[0];
}

double Tensor::operator()(std::size_t i, std::size_t j) const {
    return d_->value[i * cols() + j];
}

double& Tensor::operator()(std::size_t i, std::size_t j) {
    return d_->value[i * cols() + j];
}

bool Tensor::requires_grad() const { return d_ && d_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
    d_->requires_grad = on;
    if (on && d_->grad.size() != d_->value.size()) {
        d_->grad.assign(d_->value.size(), 0.0);
    }
    if (!on) d_->grad.clear();
}

std::vector<double>& Tensor::grad() const { return d_->grad; }

void Tensor::zero_grad() const {
    std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Tape internals

Tensor Tape::make_output(std::vector<std::size_t> shape, bool track) {
    Tensor t = Tensor::zeros(std::move(shape), track);
    if (track) outputs_.push_back(t);
    return t;
}

void Tape::record(std::function<void()> fn) {
    nodes_.push_back(Node{std::move(fn)});
}

void Tape::verify_finite(const Tensor& t, const char* op) const {
    if (!check_finite) return;
    for (double v : t.value()) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string("non-finite value produced by ") + op);
        }
    }
}

void Tape::clear() {
    nodes_.clear();
    outputs_.clear();
}

void Tape::backward(const Tensor& loss) {
    if (!loss.is_scalar()) {
        throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                    shape_str(loss.shape()));
    }
    if (!loss.requires_grad()) {
        throw std::invalid_argument("backward on a detached tensor: loss does not track gradients");
    }
    for (auto& t : outputs_) t.zero_grad();
    loss.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->backward) it->backward();
    }
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) +
                                    " and " + shape_str(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const bool track = a.requires_grad() || b.requires_grad();
    Tensor out = make_output({m, n}, track);
    const double* av = a.value().data();
    const double* bv = b.value().data();
    double* ov = out.value().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                ov[i * n + j] += aip * bv[p * n + j];
            }
        }
    }
    verify_finite(out, "matmul");
    if (track) {
        record([a, b, out, m, k, n] {
            const double* og = out.grad().data();
            if (a.requires_grad()) {
                double* ag = a.grad().data();
                const double* bv2 = b.value().data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const double g = og[i * n + j];
                        if (g == 0.0) continue;
                        for (std::size_t p = 0; p < k; ++p)
                            ag[i * k + p] += g * bv2[p * n + j];
                    }
            }
            if (b.requires_grad()) {
                double* bg = b.grad().data();
                const double* av2 = a.value().data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = av2[i * k + p];
                        if (aip == 0.0) continue;
                        for (std::size_t j = 0; j < n; ++j)
                            bg[p * n + j] += aip * og[i * n + j];
                    }
            }
        });
    }
    return out;
}

Tensor Tape::spmm(const SparseMatrix& adj, const Tensor& x) {
    if (x.shape().size() != 2 || adj.cols != x.rows()) {
        throw std::invalid_argument("spmm: adjacency " + std::to_string(adj.rows) + " x " +
                                    std::to_string(adj.cols) + " incompatible with " +
                                    shape_str(x.shape()));
    }
    for (const auto& e : adj.entries) {
        if (e.row >= adj.rows || e.col >= adj.cols) {
            throw std::invalid_argument("spmm: adjacency entry (" + std::to_string(e.row) + ", " +
                                        std::to_string(e.col) + ") out of bounds");
        }
    }
    const std::size_t d = x.cols();
    const bool track = x.requires_grad();
    Tensor out = make_output({adj.rows, d}, track);
    const double* xv = x.value().data();
    double* ov = out.value().data();
    for (const auto& e : adj.entries) {
        const double* src = xv + static_cast<std::size_t>(e.col) * d;
        double* dst = ov + static_cast<std::size_t>(e.row) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += e.weight * src[j];
    }
    verify_finite(out, "spmm");
    if (track) {
        auto entries = adj.entries;
        record([entries = std::move(entries), x, out, d] {
            const double* og = out.grad().data();
            double* xg = x.grad().data();
            for (const auto& e : entries) {
                const double* g = og + static_cast<std::size_t>(e.row) * d;
                double* dst = xg + static_cast<std::size_t>(e.col) * d;
                for (std::size_t j = 0; j < d; ++j) dst[j] += e.weight * g[j];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
}
}  // namespace

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const bool track = a.requires_grad() || b.requires_grad();
    Tensor out = make_output(a.shape(), track);
    for (std::size_t i = 0; i < a.size(); ++i) out.value()[i] = a.value()[i] + b.value()[i];
    verify_finite(out, "add");
    if (track) {
        record([a, b, out] {
            const auto& og = out.grad();
            if (a.requires_grad())
                for (std::size_t i = 0; i < og.size(); ++i) a.grad()[i] += og[i];
            if (b.requires_grad())
                for (std::size_t i = 0; i < og.size(); ++i) b.grad()[i] += og[i];
        });
    }
    return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const bool track = a.requires_grad() || b.requires_grad();
    Tensor out = make_output(a.shape(), track);
    for (std::size_t i = 0; i < a.size(); ++i) out.value()[i] = a.value()[i] - b.value()[i];
    verify_finite(out, "sub");
    if (track) {
        record([a, b, out] {
            const auto& og = out.grad();
            if (a.requires_grad())
                for (std::size_t i = 0; i < og.size(); ++i) a.grad()[i] += og[i];
            if (b.requires_grad())
                for (std::size_t i = 0; i < og.size(); ++i) b.grad()[i] -= og[i];
        });
    }
    return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const bool track = a.requires_grad() || b.requires_grad();
    Tensor out = make_output(a.shape(), track);
    for (std::size_t i = 0; i < a.size(); ++i) out.value()[i] = a.value()[i] * b.value()[i];
    verify_finite(out, "mul");
    if (track) {
        record([a, b, out] {
            const auto& og = out.grad();
            if (a.requires_grad())
                for (std::size_t i = 0; i < og.size(); ++i) a.grad()[i] += og[i] * b.value()[i];
            if (b.requires_grad())
                for (std::size_t i = 0; i < og.size(); ++i) b.grad()[i] += og[i] * a.value()[i];
        });
    }
    return out;
}

Tensor Tape::scale_add(const Tensor& x, double a, double b) {
    const bool track = x.requires_grad();
    Tensor out = make_output(x.shape(), track);
    for (std::size_t i = 0; i < x.size(); ++i) out.value()[i] = a * x.value()[i] + b;
    verify_finite(out, "scale_add");
    if (track) {
        record([x, out, a] {
            const auto& og = out.grad();
            for (std::size_t i = 0; i < og.size(); ++i) x.grad()[i] += a * og[i];
        });
    }
    return out;
}

Tensor Tape::activation(Activation kind, const Tensor& x) {
    const bool track = x.requires_grad();
    Tensor out = make_output(x.shape(), track);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x.value()[i];
        switch (kind) {
            case Activation::Elu: out.value()[i] = v >= 0.0 ? v : std::expm1(v); break;
            case Activation::Sigmoid: out.value()[i] = stable_sigmoid(v); break;
            case Activation::Tanh: out.value()[i] = std::tanh(v); break;
            case Activation::LeakyRelu: out.value()[i] = v >= 0.0 ? v : 0.01 * v; break;
        }
    }
    verify_finite(out, "activation");
    if (track) {
        record([x, out, kind] {
            const auto& og = out.grad();
            auto& xg = x.grad();
            for (std::size_t i = 0; i < og.size(); ++i) {
                const double v = x.value()[i];
                const double y = out.value()[i];
                double d = 0.0;
                switch (kind) {
                    case Activation::Elu: d = v >= 0.0 ? 1.0 : y + 1.0; break;
                    case Activation::Sigmoid: d = y * (1.0 - y); break;
                    case Activation::Tanh: d = 1.0 - y * y; break;
                    case Activation::LeakyRelu: d = v >= 0.0 ? 1.0 : 0.01; break;
                }
                xg[i] += d * og[i];
            }
        });
    }
    return out;
}

Tensor Tape::logsigmoid(const Tensor& x) {
    const bool track = x.requires_grad();
    Tensor out = make_output(x.shape(), track);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x.value()[i];
        // log(sigmoid(v)) without overflow on either tail
        out.value()[i] = v < 0.0 ? v - std::log1p(std::exp(v)) : -std::log1p(std::exp(-v));
    }
    verify_finite(out, "logsigmoid");
    if (track) {
        record([x, out] {
            const auto& og = out.grad();
            for (std::size_t i = 0; i < og.size(); ++i) {
                x.grad()[i] += og[i] * stable_sigmoid(-x.value()[i]);
            }
        });
    }
    return out;
}

Tensor Tape::add_bias(const Tensor& x, const Tensor& b) {
    if (x.shape().size() != 2 || b.size() != x.cols()) {
        throw std::invalid_argument("add_bias: " + shape_str(x.shape()) + " with bias " +
                                    shape_str(b.shape()));
    }
    const std::size_t n = x.rows(), d = x.cols();
    const bool track = x.requires_grad() || b.requires_grad();
    Tensor out = make_output(x.shape(), track);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            out.value()[i * d + j] = x.value()[i * d + j] + b.value()[j];
    verify_finite(out, "add_bias");
    if (track) {
        record([x, b, out, n, d] {
            const auto& og = out.grad();
            if (x.requires_grad())
                for (std::size_t i = 0; i < og.size(); ++i) x.grad()[i] += og[i];
            if (b.requires_grad())
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) b.grad()[j] += og[i * d + j];
        });
    }
    return out;
}

Tensor Tape::add_entry(const Tensor& x, const Tensor& v, std::size_t idx) {
    if (idx >= v.size()) {
        throw std::invalid_argument("add_entry: index " + std::to_string(idx) + " out of range for " +
                                    shape_str(v.shape()));
    }
    const bool track = x.requires_grad() || v.requires_grad();
    Tensor out = make_output(x.shape(), track);
    const double c = v.value()[idx];
    for (std::size_t i = 0; i < x.size(); ++i) out.value()[i] = x.value()[i] + c;
    verify_finite(out, "add_entry");
    if (track) {
        record([x, v, out, idx] {
            const auto& og = out.grad();
            if (x.requires_grad())
                for (std::size_t i = 0; i < og.size(); ++i) x.grad()[i] += og[i];
            if (v.requires_grad()) {
                double s = 0.0;
                for (double g : og) s += g;
                v.grad()[idx] += s;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions and reshaping

Tensor Tape::sum_all(const Tensor& x) {
    const bool track = x.requires_grad();
    Tensor out = make_output({1}, track);
    double s = 0.0;
    for (double v : x.value()) s += v;
    out.value()[0] = s;
    verify_finite(out, "sum_all");
    if (track) {
        record([x, out] {
            const double g = out.grad()[0];
            for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += g;
        });
    }
    return out;
}

Tensor Tape::mean_all(const Tensor& x) {
    if (x.size() == 0) {
        throw std::invalid_argument("mean_all: empty tensor");
    }
    const bool track = x.requires_grad();
    Tensor out = make_output({1}, track);
    double s = 0.0;
    for (double v : x.value()) s += v;
    out.value()[0] = s / static_cast<double>(x.size());
    verify_finite(out, "mean_all");
    if (track) {
        record([x, out] {
            const double g = out.grad()[0] / static_cast<double>(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += g;
        });
    }
    return out;
}

Tensor Tape::stack_scalars(const std::vector<Tensor>& xs) {
    if (xs.empty()) {
        throw std::invalid_argument("stack_scalars: empty input");
    }
    bool track = false;
    for (const auto& t : xs) {
        if (!t.is_scalar()) {
            throw std::invalid_argument("stack_scalars: non-scalar input of shape " +
                                        shape_str(t.shape()));
        }
        track = track || t.requires_grad();
    }
    Tensor out = make_output({xs.size()}, track);
    for (std::size_t i = 0; i < xs.size(); ++i) out.value()[i] = xs[i].value()[0];
    verify_finite(out, "stack_scalars");
    if (track) {
        record([xs, out] {
            for (std::size_t i = 0; i < xs.size(); ++i)
                if (xs[i].requires_grad()) xs[i].grad()[0] += out.grad()[i];
        });
    }
    return out;
}

Tensor Tape::select(const Tensor& v, std::size_t idx) {
    if (v.shape().size() != 1) {
        throw std::invalid_argument("select: expected 1-D input, got " + shape_str(v.shape()));
    }
    if (idx >= v.size()) {
        throw std::invalid_argument("select: index " + std::to_string(idx) +
                                    " out of range for length " + std::to_string(v.size()));
    }
    const bool track = v.requires_grad();
    Tensor out = make_output({}, track);
    out.value()[0] = v.value()[idx];
    if (track) {
        record([v, out, idx] { v.grad()[idx] += out.grad()[0]; });
    }
    return out;
}

Tensor Tape::broadcast_scalar(const Tensor& s, std::size_t rows, std::size_t cols) {
    if (!s.is_scalar()) {
        throw std::invalid_argument("broadcast_scalar: source has shape " + shape_str(s.shape()));
    }
    const bool track = s.requires_grad();
    Tensor out = make_output({rows, cols}, track);
    std::fill(out.value().begin(), out.value().end(), s.value()[0]);
    if (track) {
        record([s, out] {
            double g = 0.0;
            for (double v : out.grad()) g += v;
            s.grad()[0] += g;
        });
    }
    return out;
}

Tensor Tape::softmax(const Tensor& v) {
    if (v.size() == 0) {
        throw std::invalid_argument("softmax: empty input");
    }
    const bool track = v.requires_grad();
    Tensor out = make_output(v.shape(), track);
    double mx = v.value()[0];
    for (double x : v.value()) mx = std::max(mx, x);
    double z = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.value()[i] = std::exp(v.value()[i] - mx);
        z += out.value()[i];
    }
    for (double& y : out.value()) y /= z;
    verify_finite(out, "softmax");
    if (track) {
        record([v, out] {
            const auto& og = out.grad();
            const auto& y = out.value();
            double dot = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) dot += og[i] * y[i];
            for (std::size_t i = 0; i < y.size(); ++i) v.grad()[i] += y[i] * (og[i] - dot);
        });
    }
    return out;
}

Tensor Tape::weighted_sum(const std::vector<Tensor>& xs, const Tensor& w) {
    if (xs.empty() || w.size() != xs.size()) {
        throw std::invalid_argument("weighted_sum: " + std::to_string(xs.size()) +
                                    " tensors with weight shape " + shape_str(w.shape()));
    }
    bool track = w.requires_grad();
    for (const auto& t : xs) {
        require_same_shape(t, xs[0], "weighted_sum");
        track = track || t.requires_grad();
    }
    Tensor out = make_output(xs[0].shape(), track);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double wi = w.value()[i];
        for (std::size_t j = 0; j < out.size(); ++j) out.value()[j] += wi * xs[i].value()[j];
    }
    verify_finite(out, "weighted_sum");
    if (track) {
        record([xs, w, out] {
            const auto& og = out.grad();
            for (std::size_t i = 0; i < xs.size(); ++i) {
                if (xs[i].requires_grad()) {
                    const double wi = w.value()[i];
                    for (std::size_t j = 0; j < og.size(); ++j) xs[i].grad()[j] += wi * og[j];
                }
                if (w.requires_grad()) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < og.size(); ++j) s += og[j] * xs[i].value()[j];
                    w.grad()[i] += s;
                }
            }
        });
    }
    return out;
}

Tensor Tape::weighted_sum_col(const std::vector<Tensor>& xs, const Tensor& W, std::size_t col) {
    if (W.shape().size() != 2 || W.rows() != xs.size() || col >= W.cols()) {
        throw std::invalid_argument("weighted_sum_col: " + std::to_string(xs.size()) +
                                    " tensors with weight shape " + shape_str(W.shape()) +
                                    " column " + std::to_string(col));
    }
    bool track = W.requires_grad();
    for (const auto& t : xs) {
        require_same_shape(t, xs[0], "weighted_sum_col");
        track = track || t.requires_grad();
    }
    Tensor out = make_output(xs[0].shape(), track);
    const std::size_t bcols = W.cols();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double wi = W.value()[i * bcols + col];
        for (std::size_t j = 0; j < out.size(); ++j) out.value()[j] += wi * xs[i].value()[j];
    }
    verify_finite(out, "weighted_sum_col");
    if (track) {
        record([xs, W, out, col, bcols] {
            const auto& og = out.grad();
            for (std::size_t i = 0; i < xs.size(); ++i) {
                if (xs[i].requires_grad()) {
                    const double wi = W.value()[i * bcols + col];
                    for (std::size_t j = 0; j < og.size(); ++j) xs[i].grad()[j] += wi * og[j];
                }
                if (W.requires_grad()) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < og.size(); ++j) s += og[j] * xs[i].value()[j];
                    W.grad()[i * bcols + col] += s;
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Recurrent cells

Tensor Tape::gru_cell(const Tensor& x, const Tensor& h, const GruParams& p) {
    if (x.rows() != h.rows()) {
        throw std::invalid_argument("gru_cell: batch mismatch " + shape_str(x.shape()) + " vs " +
                                    shape_str(h.shape()));
    }
    Tensor z = activation(Activation::Sigmoid,
                          add_bias(add(matmul(x, p.Wz), matmul(h, p.Uz)), p.bz));
    Tensor r = activation(Activation::Sigmoid,
                          add_bias(add(matmul(x, p.Wr), matmul(h, p.Ur)), p.br));
    Tensor cand = activation(Activation::Tanh,
                             add_bias(add(matmul(x, p.Wh), matmul(mul(r, h), p.Uh)), p.bh));
    // h' = (1 - z) o h + z o cand
    return add(mul(scale_add(z, -1.0, 1.0), h), mul(z, cand));
}

std::pair<Tensor, Tensor> Tape::lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c,
                                          const LstmParams& p) {
    if (x.rows() != h.rows() || h.shape() != c.shape()) {
        throw std::invalid_argument("lstm_cell: shape mismatch " + shape_str(x.shape()) + ", " +
                                    shape_str(h.shape()) + ", " + shape_str(c.shape()));
    }
    Tensor i = activation(Activation::Sigmoid,
                          add_bias(add(matmul(x, p.Wi), matmul(h, p.Ui)), p.bi));
    Tensor f = activation(Activation::Sigmoid,
                          add_bias(add(matmul(x, p.Wf), matmul(h, p.Uf)), p.bf));
    Tensor o = activation(Activation::Sigmoid,
                          add_bias(add(matmul(x, p.Wo), matmul(h, p.Uo)), p.bo));
    Tensor g = activation(Activation::Tanh,
                          add_bias(add(matmul(x, p.Wg), matmul(h, p.Ug)), p.bg));
    Tensor c_next = add(mul(f, c), mul(i, g));
    Tensor h_next = mul(o, activation(Activation::Tanh, c_next));
    return {h_next, c_next};
}

// ---------------------------------------------------------------------------
// Pair and edge ops

Tensor Tape::pair_dot(const Tensor& h,
                      const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs) {
    const std::size_t n = h.rows(), d = h.cols();
    for (const auto& [i, j] : pairs) {
        if (i >= n || j >= n) {
            throw std::invalid_argument("pair_dot: pair (" + std::to_string(i) + ", " +
                                        std::to_string(j) + ") out of range for " +
                                        std::to_string(n) + " rows");
        }
    }
    const bool track = h.requires_grad();
    Tensor out = make_output({pairs.size()}, track);
    const double* hv = h.value().data();
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const double* a = hv + static_cast<std::size_t>(pairs[p].first) * d;
        const double* b = hv + static_cast<std::size_t>(pairs[p].second) * d;
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += a[j] * b[j];
        out.value()[p] = s;
    }
    verify_finite(out, "pair_dot");
    if (track) {
        record([h, out, pairs, d] {
            const auto& og = out.grad();
            const double* hv2 = h.value().data();
            double* hg = h.grad().data();
            for (std::size_t p = 0; p < pairs.size(); ++p) {
                const double g = og[p];
                if (g == 0.0) continue;
                const std::size_t i = pairs[p].first, j = pairs[p].second;
                for (std::size_t t = 0; t < d; ++t) {
                    hg[i * d + t] += g * hv2[j * d + t];
                    hg[j * d + t] += g * hv2[i * d + t];
                }
            }
        });
    }
    return out;
}

Tensor Tape::edge_scores(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                         const Tensor& s_src, const Tensor& s_dst) {
    for (const auto& [u, v] : edges) {
        if (u >= s_src.size() || v >= s_dst.size()) {
            throw std::invalid_argument("edge_scores: edge (" + std::to_string(u) + ", " +
                                        std::to_string(v) + ") out of range");
        }
    }
    const bool track = s_src.requires_grad() || s_dst.requires_grad();
    Tensor out = make_output({edges.size()}, track);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        out.value()[e] = s_src.value()[edges[e].first] + s_dst.value()[edges[e].second];
    }
    verify_finite(out, "edge_scores");
    if (track) {
        record([edges, s_src, s_dst, out] {
            const auto& og = out.grad();
            for (std::size_t e = 0; e < edges.size(); ++e) {
                if (s_src.requires_grad()) s_src.grad()[edges[e].first] += og[e];
                if (s_dst.requires_grad()) s_dst.grad()[edges[e].second] += og[e];
            }
        });
    }
    return out;
}

Tensor Tape::edge_softmax(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                          const Tensor& scores, std::size_t n_dst) {
    if (scores.size() != edges.size()) {
        throw std::invalid_argument("edge_softmax: " + std::to_string(edges.size()) +
                                    " edges but scores shape " + shape_str(scores.shape()));
    }
    // bucket edge ids by destination
    std::vector<std::vector<std::size_t>> groups(n_dst);
    for (std::size_t e = 0; e < edges.size(); ++e) groups[edges[e].second].push_back(e);

    const bool track = scores.requires_grad();
    Tensor out = make_output({edges.size()}, track);
    for (const auto& g : groups) {
        if (g.empty()) continue;
        double mx = scores.value()[g[0]];
        for (std::size_t e : g) mx = std::max(mx, scores.value()[e]);
        double z = 0.0;
        for (std::size_t e : g) {
            out.value()[e] = std::exp(scores.value()[e] - mx);
            z += out.value()[e];
        }
        for (std::size_t e : g) out.value()[e] /= z;
    }
    verify_finite(out, "edge_softmax");
    if (track) {
        record([scores, out, groups = std::move(groups)] {
            const auto& og = out.grad();
            const auto& y = out.value();
            for (const auto& g : groups) {
                if (g.empty()) continue;
                double dot = 0.0;
                for (std::size_t e : g) dot += og[e] * y[e];
                for (std::size_t e : g) scores.grad()[e] += y[e] * (og[e] - dot);
            }
        });
    }
    return out;
}

Tensor Tape::edge_weighted_sum(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                               const Tensor& coef, const Tensor& h_src, std::size_t n_dst) {
    if (coef.size() != edges.size()) {
        throw std::invalid_argument("edge_weighted_sum: " + std::to_string(edges.size()) +
                                    " edges but coef shape " + shape_str(coef.shape()));
    }
    const std::size_t d = h_src.cols();
    const bool track = coef.requires_grad() || h_src.requires_grad();
    Tensor out = make_output({n_dst, d}, track);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const double c = coef.value()[e];
        const double* src = h_src.value().data() + static_cast<std::size_t>(edges[e].first) * d;
        double* dst = out.value().data() + static_cast<std::size_t>(edges[e].second) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += c * src[j];
    }
    verify_finite(out, "edge_weighted_sum");
    if (track) {
        record([edges, coef, h_src, out, d] {
            const auto& og = out.grad();
            for (std::size_t e = 0; e < edges.size(); ++e) {
                const std::size_t u = edges[e].first, v = edges[e].second;
                if (coef.requires_grad()) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < d; ++j)
                        s += og[v * d + j] * h_src.value()[u * d + j];
                    coef.grad()[e] += s;
                }
                if (h_src.requires_grad()) {
                    const double c = coef.value()[e];
                    for (std::size_t j = 0; j < d; ++j)
                        h_src.grad()[u * d + j] += c * og[v * d + j];
                }
            }
        });
    }
    return out;
}

Tensor Tape::attention_mix(const std::vector<Tensor>& logits, const std::vector<Tensor>& values) {
    if (logits.empty() || logits.size() != values.size()) {
        throw std::invalid_argument("attention_mix: " + std::to_string(logits.size()) +
                                    " logit tensors for " + std::to_string(values.size()) +
                                    " value tensors");
    }
    const std::size_t n = values[0].rows(), d = values[0].cols(), m = logits.size();
    bool track = false;
    for (const auto& l : logits) {
        if (l.shape() != std::vector<std::size_t>{n, 1}) {
            throw std::invalid_argument("attention_mix: logits must be " + std::to_string(n) +
                                        " x 1, got " + shape_str(l.shape()));
        }
        track = track || l.requires_grad();
    }
    for (const auto& v : values) {
        require_same_shape(v, values[0], "attention_mix");
        track = track || v.requires_grad();
    }

    std::vector<double> w(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = logits[0].value()[i];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, logits[j].value()[i]);
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            w[i * m + j] = std::exp(logits[j].value()[i] - mx);
            z += w[i * m + j];
        }
        for (std::size_t j = 0; j < m; ++j) w[i * m + j] /= z;
    }
    Tensor out = make_output({n, d}, track);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            const double wij = w[i * m + j];
            for (std::size_t c = 0; c < d; ++c) {
                out.value()[i * d + c] += wij * values[j].value()[i * d + c];
            }
        }
    }
    verify_finite(out, "attention_mix");
    if (track) {
        record([logits, values, out, w = std::move(w), n, d, m] {
            const auto& og = out.grad();
            std::vector<double> s(m);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    s[j] = 0.0;
                    for (std::size_t c = 0; c < d; ++c) {
                        s[j] += og[i * d + c] * values[j].value()[i * d + c];
                    }
                }
                double dot = 0.0;
                for (std::size_t j = 0; j < m; ++j) dot += w[i * m + j] * s[j];
                for (std::size_t j = 0; j < m; ++j) {
                    const double wij = w[i * m + j];
                    if (values[j].requires_grad()) {
                        for (std::size_t c = 0; c < d; ++c) {
                            values[j].grad()[i * d + c] += wij * og[i * d + c];
                        }
                    }
                    if (logits[j].requires_grad()) logits[j].grad()[i] += wij * (s[j] - dot);
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Losses

Tensor Tape::cross_entropy_sum(const Tensor& logits, const std::vector<std::size_t>& rows,
                               const std::vector<std::size_t>& labels) {
    if (rows.size() != labels.size()) {
        throw std::invalid_argument("cross_entropy_sum: " + std::to_string(rows.size()) +
                                    " rows vs " + std::to_string(labels.size()) + " labels");
    }
    const std::size_t n = logits.rows(), c = logits.cols();
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t] >= n) {
            throw std::invalid_argument("cross_entropy_sum: row " + std::to_string(rows[t]) +
                                        " out of range for " + std::to_string(n));
        }
        if (labels[t] >= c) {
            throw std::invalid_argument("cross_entropy_sum: label " + std::to_string(labels[t]) +
                                        " out of range for " + std::to_string(c) + " classes");
        }
    }
    const bool track = logits.requires_grad();
    Tensor out = make_output({1}, track);
    double loss = 0.0;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        const double* row = logits.value().data() + rows[t] * c;
        double mx = row[0];
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
        loss += mx + std::log(z) - row[labels[t]];
    }
    out.value()[0] = loss;
    verify_finite(out, "cross_entropy_sum");
    if (track) {
        record([logits, out, rows, labels, c] {
            const double g = out.grad()[0];
            if (g == 0.0) return;
            for (std::size_t t = 0; t < rows.size(); ++t) {
                const double* row = logits.value().data() + rows[t] * c;
                double* gr = logits.grad().data() + rows[t] * c;
                double mx = row[0];
                for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, row[j]);
                double z = 0.0;
                for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
                for (std::size_t j = 0; j < c; ++j) {
                    const double p = std::exp(row[j] - mx) / z;
                    gr[j] += g * (p - (j == labels[t] ? 1.0 : 0.0));
                }
            }
        });
    }
    return out;
}

Tensor Tape::mae(const Tensor& pred, const std::vector<double>& target) {
    if (pred.size() != target.size() || pred.size() == 0) {
        throw std::invalid_argument("mae: prediction shape " + shape_str(pred.shape()) + " vs " +
                                    std::to_string(target.size()) + " targets");
    }
    const bool track = pred.requires_grad();
    Tensor out = make_output({1}, track);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred.value()[i] - target[i]);
    out.value()[0] = s / static_cast<double>(pred.size());
    verify_finite(out, "mae");
    if (track) {
        record([pred, out, target] {
            const double g = out.grad()[0] / static_cast<double>(pred.size());
            for (std::size_t i = 0; i < pred.size(); ++i) {
                const double r = pred.value()[i] - target[i];
                pred.grad()[i] += g * (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0));
            }
        });
    }
    return out;
}

}  // namespace htgl
