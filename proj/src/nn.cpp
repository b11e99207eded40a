#include "hwcost/nn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "hwcost/error.hpp"

namespace hwcost::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using Eigen::Index;

ConstMatMap as_matrix(const DenseTensor& t, std::size_t rows, std::size_t cols) {
    return ConstMatMap(t.data(), static_cast<Index>(rows), static_cast<Index>(cols));
}

MatMap as_matrix(DenseTensor& t, std::size_t rows, std::size_t cols) {
    return MatMap(t.data(), static_cast<Index>(rows), static_cast<Index>(cols));
}

void require_rank(const DenseTensor& x, std::size_t rank, const char* who) {
    if (x.shape.size() != rank)
        throw ShapeMismatch(std::string(who) + ": expected rank " + std::to_string(rank) + " input, got " +
                            shape_string(x.shape));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---------------------------------------------------------------------------

DenseTensor::DenseTensor(std::vector<std::size_t> s, double fill_value)
    : shape(std::move(s)), values(shape_size(shape), fill_value) {}

DenseTensor::DenseTensor(std::vector<std::size_t> s, const std::vector<double>& v)
    : DenseTensor(std::move(s), Buffer(v.begin(), v.end())) {}

DenseTensor::DenseTensor(std::vector<std::size_t> s, Buffer v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != shape_size(shape))
        throw ShapeMismatch("tensor of shape " + shape_string(shape) + " given " + std::to_string(values.size()) +
                            " values");
}

void DenseTensor::fill(double v) { std::fill(values.begin(), values.end(), v); }

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) out += (i ? ", " : "") + std::to_string(shape[i]);
    return out + "]";
}

Parameter::Parameter(std::string n, std::vector<std::size_t> shape)
    : name(std::move(n)), value(shape), grad(shape) {}

void init_uniform(Parameter& p, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : p.value.values) v = dist(rng);
}

// ---------------------------------------------------------------------------
// Embedding

Embedding::Embedding(std::size_t vocab_size, std::size_t embed_dim) : table("embedding", {vocab_size, embed_dim}) {
    if (vocab_size == 0 || embed_dim == 0) throw ConfigError("embedding dims must be positive");
}

DenseTensor Embedding::forward(std::span<const std::int32_t> ids, std::size_t batch, std::size_t len) const {
    if (ids.size() != batch * len)
        throw ShapeMismatch("embedding: " + std::to_string(ids.size()) + " ids for batch " + std::to_string(batch) +
                            " x len " + std::to_string(len));
    const std::size_t dim = embed_dim();
    DenseTensor y({batch, len, dim});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto id = ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= vocab_size())
            throw IdOutOfRange("token id " + std::to_string(id) + " outside embedding table of " +
                               std::to_string(vocab_size()) + " rows");
        std::copy_n(table.value.data() + static_cast<std::size_t>(id) * dim, dim, y.data() + i * dim);
    }
    return y;
}

void Embedding::backward(std::span<const std::int32_t> ids, const DenseTensor& dy) {
    const std::size_t dim = embed_dim();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        double* row = table.grad.data() + static_cast<std::size_t>(ids[i]) * dim;
        const double* g = dy.data() + i * dim;
        for (std::size_t d = 0; d < dim; ++d) row[d] += g[d];
    }
}

// ---------------------------------------------------------------------------
// Conv1D

Conv1D::Conv1D(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size)
    : kernel("kernel", {out_channels, in_channels, kernel_size}), bias("bias", {out_channels}) {
    if (in_channels == 0 || out_channels == 0 || kernel_size == 0) throw ConfigError("conv1d dims must be positive");
}

DenseTensor Conv1D::forward(const DenseTensor& x, Cache* cache) const {
    require_rank(x, 3, "conv1d");
    const std::size_t batch = x.dim(0), len = x.dim(1), in = x.dim(2);
    const std::size_t k = kernel_size(), out = out_channels();
    if (in != in_channels())
        throw ShapeMismatch("conv1d: input has " + std::to_string(in) + " channels, kernel expects " +
                            std::to_string(in_channels()));
    if (len < k)
        throw SequenceTooShort("conv1d: sequence length " + std::to_string(len) + " shorter than kernel " +
                               std::to_string(k));
    const std::size_t out_len = len - k + 1;

    // columns[b*out_len + t][j*in + c] = x[b][t+j][c]
    DenseTensor columns({batch * out_len, k * in});
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < out_len; ++t)
            for (std::size_t j = 0; j < k; ++j)
                std::copy_n(x.data() + (b * len + t + j) * in, in, columns.data() + ((b * out_len + t) * k + j) * in);

    // weights[j*in + c][o] = kernel[o][c][j]
    RowMatrix weights(static_cast<Index>(k * in), static_cast<Index>(out));
    for (std::size_t o = 0; o < out; ++o)
        for (std::size_t c = 0; c < in; ++c)
            for (std::size_t j = 0; j < k; ++j)
                weights(static_cast<Index>(j * in + c), static_cast<Index>(o)) = kernel.value.values[(o * in + c) * k + j];

    DenseTensor y({batch, out_len, out});
    auto ym = as_matrix(y, batch * out_len, out);
    ym.noalias() = as_matrix(columns, batch * out_len, k * in) * weights;
    ym.rowwise() += ConstVecMap(bias.value.data(), static_cast<Index>(out)).transpose();

    if (cache) {
        cache->columns = std::move(columns);
        cache->batch = batch;
        cache->in_len = len;
    }
    return y;
}

DenseTensor Conv1D::backward(const DenseTensor& dy, const Cache& cache) {
    const std::size_t batch = cache.batch, len = cache.in_len;
    const std::size_t in = in_channels(), out = out_channels(), k = kernel_size();
    const std::size_t out_len = len - k + 1;
    if (dy.shape != std::vector<std::size_t>{batch, out_len, out})
        throw ShapeMismatch("conv1d backward: gradient shape " + shape_string(dy.shape));

    auto dym = as_matrix(dy, batch * out_len, out);
    auto cols = as_matrix(cache.columns, batch * out_len, k * in);

    RowMatrix dweights = cols.transpose() * dym;  // [k*in, out]
    for (std::size_t o = 0; o < out; ++o)
        for (std::size_t c = 0; c < in; ++c)
            for (std::size_t j = 0; j < k; ++j)
                kernel.grad.values[(o * in + c) * k + j] += dweights(static_cast<Index>(j * in + c), static_cast<Index>(o));
    VecMap(bias.grad.data(), static_cast<Index>(out)) += dym.colwise().sum().transpose();

    RowMatrix weights(static_cast<Index>(k * in), static_cast<Index>(out));
    for (std::size_t o = 0; o < out; ++o)
        for (std::size_t c = 0; c < in; ++c)
            for (std::size_t j = 0; j < k; ++j)
                weights(static_cast<Index>(j * in + c), static_cast<Index>(o)) = kernel.value.values[(o * in + c) * k + j];
    RowMatrix dcols = dym * weights.transpose();  // [batch*out_len, k*in]

    DenseTensor dx({batch, len, in});
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < out_len; ++t)
            for (std::size_t j = 0; j < k; ++j) {
                const double* src = dcols.data() + ((b * out_len + t) * k + j) * in;
                double* dst = dx.data() + (b * len + t + j) * in;
                for (std::size_t c = 0; c < in; ++c) dst[c] += src[c];
            }
    return dx;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::size_t in, std::size_t out) : weight("weight", {out, in}), bias("bias", {out}) {
    if (in == 0 || out == 0) throw ConfigError("dense dims must be positive");
}

DenseTensor Dense::forward(const DenseTensor& x, DenseTensor* input_cache) const {
    require_rank(x, 2, "dense");
    const std::size_t rows = x.dim(0), in = in_features(), out = out_features();
    if (x.dim(1) != in)
        throw ShapeMismatch("dense: input has " + std::to_string(x.dim(1)) + " features, layer expects " +
                            std::to_string(in));
    DenseTensor y({rows, out});
    auto ym = as_matrix(y, rows, out);
    ym.noalias() = as_matrix(x, rows, in) * as_matrix(weight.value, out, in).transpose();
    ym.rowwise() += ConstVecMap(bias.value.data(), static_cast<Index>(out)).transpose();
    if (input_cache) *input_cache = x;
    return y;
}

DenseTensor Dense::backward(const DenseTensor& dy, const DenseTensor& input) {
    const std::size_t rows = input.dim(0), in = in_features(), out = out_features();
    if (dy.shape != std::vector<std::size_t>{rows, out})
        throw ShapeMismatch("dense backward: gradient shape " + shape_string(dy.shape));
    auto dym = as_matrix(dy, rows, out);
    as_matrix(weight.grad, out, in).noalias() += dym.transpose() * as_matrix(input, rows, in);
    VecMap(bias.grad.data(), static_cast<Index>(out)) += dym.colwise().sum().transpose();
    DenseTensor dx({rows, in});
    as_matrix(dx, rows, in).noalias() = dym * as_matrix(weight.value, out, in);
    return dx;
}

// ---------------------------------------------------------------------------
// Pooling, activations, masked mean

DenseTensor maxpool1d_forward(const DenseTensor& x, PoolSpec pool, MaxPoolCache* cache) {
    require_rank(x, 3, "maxpool1d");
    const std::size_t batch = x.dim(0), len = x.dim(1), ch = x.dim(2);
    const std::size_t window = pool.window == 0 ? len : pool.window;
    const std::size_t stride = pool.window == 0 ? 1 : pool.stride;
    if (stride == 0) throw ConfigError("maxpool1d stride must be positive");
    if (len < window || len == 0)
        throw SequenceTooShort("maxpool1d: sequence length " + std::to_string(len) + " shorter than window " +
                               std::to_string(window));
    const std::size_t out_len = (len - window) / stride + 1;
    DenseTensor y({batch, out_len, ch});
    std::vector<std::size_t> argmax(y.size());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < out_len; ++o)
            for (std::size_t c = 0; c < ch; ++c) {
                std::size_t best = (b * len + o * stride) * ch + c;
                for (std::size_t i = 1; i < window; ++i) {
                    const std::size_t idx = (b * len + o * stride + i) * ch + c;
                    if (x.values[idx] > x.values[best]) best = idx;
                }
                const std::size_t out_idx = (b * out_len + o) * ch + c;
                y.values[out_idx] = x.values[best];
                argmax[out_idx] = best;
            }
    if (cache) {
        cache->argmax = std::move(argmax);
        cache->input_shape = x.shape;
    }
    return y;
}

DenseTensor maxpool1d_backward(const DenseTensor& dy, const MaxPoolCache& cache) {
    if (dy.size() != cache.argmax.size()) throw ShapeMismatch("maxpool1d backward: gradient size mismatch");
    DenseTensor dx(cache.input_shape);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.values[cache.argmax[i]] += dy.values[i];
    return dx;
}

DenseTensor relu_forward(const DenseTensor& x, std::vector<std::uint8_t>* mask) {
    DenseTensor y = x;
    if (mask) mask->assign(x.size(), 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const bool on = x.values[i] > 0.0;
        if (!on) y.values[i] = 0.0;
        if (mask) (*mask)[i] = on;
    }
    return y;
}

DenseTensor relu_backward(const DenseTensor& dy, const std::vector<std::uint8_t>& mask) {
    if (dy.size() != mask.size()) throw ShapeMismatch("relu backward: gradient size mismatch");
    DenseTensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (!mask[i]) dx.values[i] = 0.0;
    return dx;
}

DenseTensor masked_mean_forward(const DenseTensor& x, std::span<const std::int32_t> ids, std::int32_t pad_id,
                                std::vector<std::size_t>* counts) {
    require_rank(x, 3, "masked_mean");
    const std::size_t batch = x.dim(0), len = x.dim(1), dim = x.dim(2);
    if (ids.size() != batch * len) throw ShapeMismatch("masked_mean: id count does not match input");
    DenseTensor y({batch, dim});
    std::vector<std::size_t> n(batch, 0);
    for (std::size_t b = 0; b < batch; ++b) {
        double* out = y.data() + b * dim;
        for (std::size_t t = 0; t < len; ++t) {
            if (ids[b * len + t] == pad_id) continue;
            ++n[b];
            const double* row = x.data() + (b * len + t) * dim;
            for (std::size_t d = 0; d < dim; ++d) out[d] += row[d];
        }
        if (n[b] > 0)
            for (std::size_t d = 0; d < dim; ++d) out[d] /= static_cast<double>(n[b]);
    }
    if (counts) *counts = std::move(n);
    return y;
}

DenseTensor masked_mean_backward(const DenseTensor& dy, std::span<const std::int32_t> ids, std::int32_t pad_id,
                                 const std::vector<std::size_t>& counts, std::size_t len) {
    const std::size_t batch = counts.size(), dim = dy.dim(1);
    DenseTensor dx({batch, len, dim});
    for (std::size_t b = 0; b < batch; ++b) {
        if (counts[b] == 0) continue;
        const double scale = 1.0 / static_cast<double>(counts[b]);
        for (std::size_t t = 0; t < len; ++t) {
            if (ids[b * len + t] == pad_id) continue;
            double* row = dx.data() + (b * len + t) * dim;
            for (std::size_t d = 0; d < dim; ++d) row[d] = dy.values[b * dim + d] * scale;
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// GRU

Gru::Gru(std::size_t input_dim, std::size_t hidden)
    : w_ih("w_ih", {3 * hidden, input_dim}),
      w_hh("w_hh", {3 * hidden, hidden}),
      b_ih("b_ih", {3 * hidden}),
      b_hh("b_hh", {3 * hidden}) {
    if (input_dim == 0 || hidden == 0) throw ConfigError("gru dims must be positive");
}

DenseTensor Gru::forward(const DenseTensor& x, std::span<const std::size_t> lengths, Cache* cache) const {
    require_rank(x, 3, "gru");
    const std::size_t batch = x.dim(0), len = x.dim(1), d = x.dim(2), h = hidden();
    if (d != input_dim()) throw ShapeMismatch("gru: input dim mismatch");
    if (lengths.size() != batch) throw ShapeMismatch("gru: one length per sequence required");
    std::size_t steps = 0;
    for (auto l : lengths) {
        if (l == 0 || l > len) throw SequenceTooShort("gru: sequence lengths must be in [1, len]");
        steps = std::max(steps, l);
    }

    // Input projections for every position at once: [B*L, 3H].
    RowMatrix xi = as_matrix(x, batch * len, d) * as_matrix(w_ih.value, 3 * h, d).transpose();
    xi.rowwise() += ConstVecMap(b_ih.value.data(), static_cast<Index>(3 * h)).transpose();
    auto whh = as_matrix(w_hh.value, 3 * h, h);
    auto bhh = ConstVecMap(b_hh.value.data(), static_cast<Index>(3 * h)).transpose();

    DenseTensor state({batch, h});
    DenseTensor out({batch, h});
    if (cache) {
        cache->input = x;
        cache->lengths.assign(lengths.begin(), lengths.end());
        cache->steps = steps;
        cache->h.assign(1, state);
        cache->r.clear();
        cache->z.clear();
        cache->n.clear();
        cache->hn.clear();
    }
    for (std::size_t t = 0; t < steps; ++t) {
        RowMatrix hh = as_matrix(state, batch, h) * whh.transpose();
        hh.rowwise() += bhh;
        DenseTensor r({batch, h}), z({batch, h}), n({batch, h}), hn({batch, h}), next({batch, h});
        for (std::size_t b = 0; b < batch; ++b) {
            const double* xr = xi.data() + (b * len + t) * 3 * h;
            const double* hr = hh.data() + b * 3 * h;
            for (std::size_t j = 0; j < h; ++j) {
                const std::size_t i = b * h + j;
                r.values[i] = sigmoid(xr[j] + hr[j]);
                z.values[i] = sigmoid(xr[h + j] + hr[h + j]);
                hn.values[i] = hr[2 * h + j];
                n.values[i] = std::tanh(xr[2 * h + j] + r.values[i] * hn.values[i]);
                next.values[i] = (1.0 - z.values[i]) * n.values[i] + z.values[i] * state.values[i];
            }
            if (t + 1 == lengths[b]) std::copy_n(next.data() + b * h, h, out.data() + b * h);
        }
        state = std::move(next);
        if (cache) {
            cache->r.push_back(std::move(r));
            cache->z.push_back(std::move(z));
            cache->n.push_back(std::move(n));
            cache->hn.push_back(std::move(hn));
            cache->h.push_back(state);
        }
    }
    return out;
}

DenseTensor Gru::backward(const DenseTensor& dy, const Cache& cache) {
    const std::size_t batch = cache.input.dim(0), len = cache.input.dim(1), d = cache.input.dim(2), h = hidden();
    if (dy.shape != std::vector<std::size_t>{batch, h}) throw ShapeMismatch("gru backward: gradient shape mismatch");
    auto whh = as_matrix(w_hh.value, 3 * h, h);

    RowMatrix dxi = RowMatrix::Zero(static_cast<Index>(batch * len), static_cast<Index>(3 * h));
    RowMatrix dh = RowMatrix::Zero(static_cast<Index>(batch), static_cast<Index>(h));
    RowMatrix dhh(static_cast<Index>(batch), static_cast<Index>(3 * h));
    auto dwhh = as_matrix(w_hh.grad, 3 * h, h);
    auto dbhh = VecMap(b_hh.grad.data(), static_cast<Index>(3 * h));

    for (std::size_t t = cache.steps; t-- > 0;) {
        for (std::size_t b = 0; b < batch; ++b)
            if (t + 1 == cache.lengths[b])
                for (std::size_t j = 0; j < h; ++j) dh(static_cast<Index>(b), static_cast<Index>(j)) += dy.values[b * h + j];

        const auto& r = cache.r[t];
        const auto& z = cache.z[t];
        const auto& n = cache.n[t];
        const auto& hn = cache.hn[t];
        const auto& hprev = cache.h[t];
        RowMatrix dprev(static_cast<Index>(batch), static_cast<Index>(h));
        for (std::size_t b = 0; b < batch; ++b) {
            double* dx_row = dxi.data() + (b * len + t) * 3 * h;
            double* dhh_row = dhh.data() + b * 3 * h;
            for (std::size_t j = 0; j < h; ++j) {
                const std::size_t i = b * h + j;
                const double g = dh(static_cast<Index>(b), static_cast<Index>(j));
                const double dn = g * (1.0 - z.values[i]);
                const double dz = g * (hprev.values[i] - n.values[i]);
                const double dn_pre = dn * (1.0 - n.values[i] * n.values[i]);
                const double dr = dn_pre * hn.values[i];
                const double dr_pre = dr * r.values[i] * (1.0 - r.values[i]);
                const double dz_pre = dz * z.values[i] * (1.0 - z.values[i]);
                dx_row[j] = dr_pre;
                dx_row[h + j] = dz_pre;
                dx_row[2 * h + j] = dn_pre;
                dhh_row[j] = dr_pre;
                dhh_row[h + j] = dz_pre;
                dhh_row[2 * h + j] = dn_pre * r.values[i];
                dprev(static_cast<Index>(b), static_cast<Index>(j)) = g * z.values[i];
            }
        }
        dwhh.noalias() += dhh.transpose() * as_matrix(hprev, batch, h);
        dbhh += dhh.colwise().sum().transpose();
        dprev.noalias() += dhh * whh;
        dh = std::move(dprev);
    }

    as_matrix(w_ih.grad, 3 * h, d).noalias() += dxi.transpose() * as_matrix(cache.input, batch * len, d);
    VecMap(b_ih.grad.data(), static_cast<Index>(3 * h)) += dxi.colwise().sum().transpose();
    DenseTensor dx({batch, len, d});
    as_matrix(dx, batch * len, d).noalias() = dxi * as_matrix(w_ih.value, 3 * h, d);
    return dx;
}

// ---------------------------------------------------------------------------
// Loss and optimizers

double mse_loss(std::span<const double> pred, std::span<const double> target, std::vector<double>* grad) {
    if (pred.size() != target.size() || pred.empty())
        throw ShapeMismatch("mse_loss: " + std::to_string(pred.size()) + " predictions vs " +
                            std::to_string(target.size()) + " targets");
    const double n = static_cast<double>(pred.size());
    double sum = 0.0;
    if (grad) grad->resize(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diff = pred[i] - target[i];
        sum += diff * diff;
        if (grad) (*grad)[i] = 2.0 * diff / n;
    }
    return sum / n;
}

void sgd_step(std::span<Parameter* const> params, double lr) {
    for (Parameter* p : params) {
        if (p->grad.size() != p->value.size()) throw ShapeMismatch("sgd: gradient shape mismatch for " + p->name);
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value.values[i] -= lr * p->grad.values[i];
    }
}

void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamHyper& hyper) {
    if (state.m.empty()) {
        for (Parameter* p : params) {
            state.m.emplace_back(p->value.shape);
            state.v.emplace_back(p->value.shape);
        }
    }
    if (state.m.size() != params.size()) throw ShapeMismatch("adam: state does not match parameter list");
    ++state.step;
    const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k];
        auto& m = state.m[k].values;
        auto& v = state.v[k].values;
        if (p.grad.size() != p.value.size() || m.size() != p.value.size())
            throw ShapeMismatch("adam: shape mismatch for " + p.name);
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad.values[i];
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p.value.values[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Gradient checking

GradCheckResult grad_check(const GradCheckProblem& problem, double eps) {
    for (Parameter* p : problem.params) p->zero_grad();
    problem.gradient();
    std::vector<Buffer> analytic;
    for (Parameter* p : problem.params) analytic.push_back(p->grad.values);

    std::uint64_t base_sig = 0;
    if (problem.branch_signature) {
        problem.loss();
        base_sig = problem.branch_signature();
    }

    GradCheckResult result;
    for (std::size_t k = 0; k < problem.params.size(); ++k) {
        Parameter& p = *problem.params[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double saved = p.value.values[i];
            p.value.values[i] = saved + eps;
            const double up = problem.loss();
            const bool up_same = !problem.branch_signature || problem.branch_signature() == base_sig;
            p.value.values[i] = saved - eps;
            const double down = problem.loss();
            const bool down_same = !problem.branch_signature || problem.branch_signature() == base_sig;
            p.value.values[i] = saved;
            if (!up_same || !down_same) {
                ++result.skipped;
                continue;
            }
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[k][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
            ++result.checked;
        }
    }
    return result;
}

}  // namespace hwcost::nn
