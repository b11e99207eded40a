#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <new>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hwcost::nn {

/// Cache-line aligned storage. Vectorized kernels choose their scalar
/// prologue from the buffer address, so a fixed alignment keeps results
/// bit-identical from run to run.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const {
        return true;
    }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

inline bool operator==(const Buffer& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

/// Row-major dense array of doubles.
struct DenseTensor {
    std::vector<std::size_t> shape;
    Buffer values;

    DenseTensor() = default;
    explicit DenseTensor(std::vector<std::size_t> shape, double fill = 0.0);
    DenseTensor(std::vector<std::size_t> shape, Buffer values);
    DenseTensor(std::vector<std::size_t> shape, const std::vector<double>& values);

    std::size_t size() const { return values.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
    double* data() { return values.data(); }
    const double* data() const { return values.data(); }
    void fill(double v);

    friend bool operator==(const DenseTensor&, const DenseTensor&) = default;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);
std::string shape_string(const std::vector<std::size_t>& shape);

/// A learned tensor together with its accumulated gradient.
struct Parameter {
    std::string name;
    DenseTensor value;
    DenseTensor grad;

    Parameter() = default;
    Parameter(std::string name, std::vector<std::size_t> shape);
    void zero_grad() { grad.fill(0.0); }
};

/// uniform(-sqrt(1/fan_in), +sqrt(1/fan_in))
void init_uniform(Parameter& p, std::size_t fan_in, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Layers. Activations are [batch, len, channels] (or [rows, features] for
// Dense). forward() records what backward() needs into a caller-owned cache
// and leaves the layer untouched; backward() accumulates parameter gradients
// and returns the gradient with respect to the layer input.

class Embedding {
public:
    Embedding(std::size_t vocab_size, std::size_t embed_dim);

    /// ids has batch*len entries. Throws IdOutOfRange.
    DenseTensor forward(std::span<const std::int32_t> ids, std::size_t batch, std::size_t len) const;
    void backward(std::span<const std::int32_t> ids, const DenseTensor& dy);

    std::size_t vocab_size() const { return table.value.dim(0); }
    std::size_t embed_dim() const { return table.value.dim(1); }

    Parameter table;  // [vocab, dim]
};

class Conv1D {
public:
    struct Cache {
        DenseTensor columns;  // [batch*out_len, kernel*in_ch]
        std::size_t batch = 0;
        std::size_t in_len = 0;
    };

    Conv1D(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size);

    /// Valid cross-correlation; [B, L, in] -> [B, L-k+1, out]. Throws SequenceTooShort, ShapeMismatch.
    DenseTensor forward(const DenseTensor& x, Cache* cache) const;
    DenseTensor backward(const DenseTensor& dy, const Cache& cache);

    std::size_t in_channels() const { return kernel.value.dim(1); }
    std::size_t out_channels() const { return kernel.value.dim(0); }
    std::size_t kernel_size() const { return kernel.value.dim(2); }

    Parameter kernel;  // [out, in, k]
    Parameter bias;    // [out]
};

class Dense {
public:
    Dense(std::size_t in, std::size_t out);

    /// [N, in] -> [N, out]. Throws ShapeMismatch.
    DenseTensor forward(const DenseTensor& x, DenseTensor* input_cache) const;
    DenseTensor backward(const DenseTensor& dy, const DenseTensor& input);

    std::size_t in_features() const { return weight.value.dim(1); }
    std::size_t out_features() const { return weight.value.dim(0); }

    Parameter weight;  // [out, in]
    Parameter bias;    // [out]
};

/// Window 0 means global pooling over the whole sequence.
struct PoolSpec {
    std::size_t window = 0;
    std::size_t stride = 1;

    friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

struct MaxPoolCache {
    std::vector<std::size_t> argmax;  // flat input index per output element
    std::vector<std::size_t> input_shape;
};

/// [B, L, C] -> [B, Lo, C]. Ties route to the first index. Throws SequenceTooShort.
DenseTensor maxpool1d_forward(const DenseTensor& x, PoolSpec pool, MaxPoolCache* cache);
DenseTensor maxpool1d_backward(const DenseTensor& dy, const MaxPoolCache& cache);

/// Elementwise max(0, x); the mask records x > 0 (subgradient 0 at the kink).
DenseTensor relu_forward(const DenseTensor& x, std::vector<std::uint8_t>* mask);
DenseTensor relu_backward(const DenseTensor& dy, const std::vector<std::uint8_t>& mask);

/// Mean over positions whose id is not PAD; [B, L, D] -> [B, D]. All-PAD rows yield zeros.
DenseTensor masked_mean_forward(const DenseTensor& x, std::span<const std::int32_t> ids, std::int32_t pad_id,
                                std::vector<std::size_t>* counts);
DenseTensor masked_mean_backward(const DenseTensor& dy, std::span<const std::int32_t> ids, std::int32_t pad_id,
                                 const std::vector<std::size_t>& counts, std::size_t len);

/// Single-layer gated recurrent unit run left to right; the output for each
/// sequence is the hidden state after its last counted step.
class Gru {
public:
    struct Cache {
        DenseTensor input;                    // [B, L, D]
        std::vector<std::size_t> lengths;     // steps per sequence
        std::size_t steps = 0;                // max length in the batch
        std::vector<DenseTensor> h;           // h[t] is the state before step t, [B, H]; steps+1 entries
        std::vector<DenseTensor> r, z, n;     // gate activations per step, [B, H]
        std::vector<DenseTensor> hn;          // W_hn h + b_hn per step, [B, H]
    };

    Gru(std::size_t input_dim, std::size_t hidden);

    /// lengths[b] in [1, L]. Returns [B, H].
    DenseTensor forward(const DenseTensor& x, std::span<const std::size_t> lengths, Cache* cache) const;
    DenseTensor backward(const DenseTensor& dy, const Cache& cache);

    std::size_t hidden() const { return w_hh.value.dim(1); }
    std::size_t input_dim() const { return w_ih.value.dim(1); }

    Parameter w_ih;  // [3H, D], gate blocks r | z | n
    Parameter w_hh;  // [3H, H]
    Parameter b_ih;  // [3H]
    Parameter b_hh;  // [3H]
};

/// Mean of squared differences; writes d(loss)/d(pred) when grad is non-null. Throws ShapeMismatch.
double mse_loss(std::span<const double> pred, std::span<const double> target, std::vector<double>* grad);

// ---------------------------------------------------------------------------
// Optimizers

void sgd_step(std::span<Parameter* const> params, double lr);

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::int64_t step = 0;
    std::vector<DenseTensor> m;
    std::vector<DenseTensor> v;
};

/// Bias-corrected Adam. Allocates moments on first use. Throws ShapeMismatch.
void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamHyper& hyper);

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckProblem {
    std::function<double()> loss;      // forward only
    std::function<void()> gradient;    // zeroes and fills Parameter::grad for every param
    std::vector<Parameter*> params;
    /// Optional fingerprint of the piecewise-linear branch taken (ReLU masks,
    /// pooling winners). Coordinates whose ±eps probes change it straddle a
    /// kink and are skipped.
    std::function<std::uint64_t()> branch_signature;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
};

/// Central differences against the analytic gradient; relative error is
/// |a-b| / max(|a|, |b|, 1e-8), maximized over all coordinates.
GradCheckResult grad_check(const GradCheckProblem& problem, double eps = 1e-4);

}  // namespace hwcost::nn
