#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hwcost/dataset.hpp"
#include "hwcost/nn.hpp"
#include "hwcost/tokenizer.hpp"

namespace hwcost::model {

enum class Architecture { BagFC, Recurrent, ConvStack };

std::string_view architecture_name(Architecture a);  // bagfc / recurrent / convstack
Architecture architecture_from_name(std::string_view name);

struct ConvLayerSpec {
    std::size_t out_channels = 64;
    std::size_t kernel_size = 2;

    friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

struct TargetNorm {
    bool zscore = false;
    double mean = 0.0;
    double std = 1.0;

    double normalize(double y) const { return zscore ? (y - mean) / std : y; }
    double denormalize(double y) const { return zscore ? y * std + mean : y; }

    friend bool operator==(const TargetNorm&, const TargetNorm&) = default;
};

struct ModelConfig {
    Architecture architecture = Architecture::ConvStack;
    std::size_t vocab_size = 0;
    std::size_t embed_dim = 64;
    std::size_t max_len = 112;
    std::vector<ConvLayerSpec> conv_layers = std::vector<ConvLayerSpec>(6, ConvLayerSpec{});
    std::vector<std::size_t> fc_sizes = {128, 64, 1};
    std::size_t recurrent_hidden = 128;
    nn::PoolSpec pooling;  // window 0 = global
    TargetNorm target_norm;
    tok::Mode mode = tok::Mode::OpsOnly;
    data::TargetKind target_kind = data::TargetKind::RegisterPressure;
    std::uint64_t seed = 1;

    /// Throws ConfigError.
    void check() const;
    /// Sequence length left after the convolution stack.
    std::size_t conv_output_len() const;

    std::string to_text() const;
    static ModelConfig from_text(std::string_view text);

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Per-forward intermediate values needed for the backward pass.
struct ForwardCache;

class Model {
public:
    /// Builds the architecture and initializes parameters from config.seed. Throws ConfigError.
    explicit Model(ModelConfig config);
    ~Model();
    Model(const Model& other);
    Model& operator=(const Model& other);
    Model(Model&&) noexcept;
    Model& operator=(Model&&) noexcept;

    const ModelConfig& config() const { return config_; }
    void set_target_norm(TargetNorm norm) { config_.target_norm = norm; }

    /// Every learned tensor, in a fixed order.
    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;
    std::size_t parameter_count() const;

    /// Raw (normalized-scale) outputs for batch sequences of max_len ids each.
    /// Records intermediates into cache when non-null.
    std::vector<double> forward(std::span<const tok::TokenId> ids, std::size_t batch, ForwardCache* cache) const;
    /// Accumulates parameter gradients given d(loss)/d(raw output).
    void backward(std::span<const double> d_out, ForwardCache& cache);

    /// Fingerprint of the ReLU masks and pooling winners of the cached forward.
    static std::uint64_t branch_signature(const ForwardCache& cache);

    struct Impl;

private:
    ModelConfig config_;
    std::unique_ptr<Impl> impl_;
};

struct ForwardCacheDeleter {
    void operator()(ForwardCache* c) const;
};
using ForwardCachePtr = std::unique_ptr<ForwardCache, ForwardCacheDeleter>;

ForwardCachePtr make_cache();

/// Denormalized prediction; utilization outputs are clamped to [0, 1].
/// Throws ModeMismatch, LengthMismatch.
double predict(const Model& model, const tok::TokenSequence& s);
std::vector<double> predict_batch(const Model& model, std::span<const tok::TokenSequence> seqs);

/// round-half-away-from-zero, floored at 0.
std::int64_t round_prediction(double raw);
std::int64_t predict_rounded(const Model& model, const tok::TokenSequence& s);

}  // namespace hwcost::model
