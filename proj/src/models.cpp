#include "hwcost/models.hpp"

#include <algorithm>
#include <cmath>

#include "hwcost/error.hpp"
#include "hwcost/util.hpp"

namespace hwcost::model {

std::string_view architecture_name(Architecture a) {
    switch (a) {
        case Architecture::BagFC: return "bagfc";
        case Architecture::Recurrent: return "recurrent";
        case Architecture::ConvStack: return "convstack";
    }
    return "?";
}

Architecture architecture_from_name(std::string_view name) {
    for (auto a : {Architecture::BagFC, Architecture::Recurrent, Architecture::ConvStack})
        if (architecture_name(a) == name) return a;
    throw ConfigError("unknown architecture `" + std::string(name) + "` (bagfc | recurrent | convstack)");
}

// ---------------------------------------------------------------------------
// Config

std::size_t ModelConfig::conv_output_len() const {
    std::size_t shrink = 0;
    for (const auto& c : conv_layers) shrink += c.kernel_size - 1;
    return shrink < max_len ? max_len - shrink : 0;
}

void ModelConfig::check() const {
    if (vocab_size <= tok::kNumReserved) throw ConfigError("vocab_size must exceed the 4 reserved ids");
    if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
    if (max_len < 2) throw ConfigError("max_len must be >= 2");
    if (fc_sizes.empty() || fc_sizes.back() != 1) throw ConfigError("fc_sizes must end in 1");
    for (auto s : fc_sizes)
        if (s == 0) throw ConfigError("fc_sizes entries must be positive");
    if (architecture == Architecture::ConvStack) {
        if (conv_layers.empty()) throw ConfigError("convstack needs at least one conv layer");
        std::size_t shrink = 0;
        for (const auto& c : conv_layers) {
            if (c.out_channels == 0 || c.kernel_size == 0) throw ConfigError("conv layer dims must be positive");
            shrink += c.kernel_size - 1;
        }
        if (shrink >= max_len)
            throw ConfigError("conv stack shrinks the sequence by " + std::to_string(shrink) +
                              " which consumes max_len " + std::to_string(max_len));
        if (pooling.window != 0) {
            if (pooling.stride == 0) throw ConfigError("pooling stride must be positive");
            if (pooling.window > conv_output_len())
                throw ConfigError("pooling window exceeds the conv output length");
        }
    }
    if (architecture == Architecture::Recurrent && recurrent_hidden == 0)
        throw ConfigError("recurrent_hidden must be positive");
    if (target_norm.zscore && !(target_norm.std > 0.0)) throw ConfigError("target_norm std must be positive");
}

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    if (trim(text).empty()) return out;
    for (const auto& part : split(text, ',')) {
        auto v = parse_int(part);
        if (v < 0) throw ConfigError("negative size `" + part + "`");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

}  // namespace

std::string ModelConfig::to_text() const {
    KeyValueMap kv;
    kv.set("architecture", std::string(architecture_name(architecture)));
    kv.set("vocab_size", std::to_string(vocab_size));
    kv.set("embed_dim", std::to_string(embed_dim));
    kv.set("max_len", std::to_string(max_len));
    std::vector<std::size_t> channels, kernels;
    for (const auto& c : conv_layers) {
        channels.push_back(c.out_channels);
        kernels.push_back(c.kernel_size);
    }
    kv.set("conv_channels", join_sizes(channels));
    kv.set("conv_kernel_sizes", join_sizes(kernels));
    kv.set("fc_sizes", join_sizes(fc_sizes));
    kv.set("recurrent_hidden", std::to_string(recurrent_hidden));
    kv.set("pool_window", std::to_string(pooling.window));
    kv.set("pool_stride", std::to_string(pooling.stride));
    kv.set("target_norm", target_norm.zscore ? "zscore" : "none");
    kv.set("target_mean", format_double(target_norm.mean));
    kv.set("target_std", format_double(target_norm.std));
    kv.set("mode", std::string(tok::mode_name(mode)));
    kv.set("target_kind", std::string(data::target_kind_name(target_kind)));
    kv.set("seed", std::to_string(seed));
    return kv.to_text();
}

ModelConfig ModelConfig::from_text(std::string_view text) {
    auto kv = KeyValueMap::parse(text);
    ModelConfig c;
    c.architecture = architecture_from_name(kv.get("architecture"));
    c.vocab_size = static_cast<std::size_t>(kv.get_int("vocab_size"));
    c.embed_dim = static_cast<std::size_t>(kv.get_int("embed_dim"));
    c.max_len = static_cast<std::size_t>(kv.get_int("max_len"));
    auto channels = parse_sizes(kv.get("conv_channels"));
    auto kernels = parse_sizes(kv.get("conv_kernel_sizes"));
    if (channels.size() != kernels.size()) throw ConfigError("conv_channels and conv_kernel_sizes differ in length");
    c.conv_layers.clear();
    for (std::size_t i = 0; i < channels.size(); ++i) c.conv_layers.push_back({channels[i], kernels[i]});
    c.fc_sizes = parse_sizes(kv.get("fc_sizes"));
    c.recurrent_hidden = static_cast<std::size_t>(kv.get_int("recurrent_hidden"));
    c.pooling.window = static_cast<std::size_t>(kv.get_int("pool_window"));
    c.pooling.stride = static_cast<std::size_t>(kv.get_int("pool_stride"));
    const auto& norm = kv.get("target_norm");
    if (norm != "zscore" && norm != "none") throw ConfigError("target_norm must be zscore or none");
    c.target_norm.zscore = norm == "zscore";
    c.target_norm.mean = kv.get_double("target_mean");
    c.target_norm.std = kv.get_double("target_std");
    c.mode = tok::mode_from_name(kv.get("mode"));
    c.target_kind = data::target_kind_from_name(kv.get("target_kind"));
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed"));
    c.check();
    return c;
}

// ---------------------------------------------------------------------------
// Networks

struct ForwardCache {
    std::vector<tok::TokenId> ids;
    std::size_t batch = 0;
    std::size_t len = 0;
    // conv stack
    std::vector<nn::Conv1D::Cache> conv;
    std::vector<std::vector<std::uint8_t>> conv_relu;
    nn::MaxPoolCache pool;
    std::vector<std::size_t> pooled_shape;
    // bag
    std::vector<std::size_t> counts;
    // recurrent
    nn::Gru::Cache gru;
    // dense head
    std::vector<nn::DenseTensor> dense_inputs;
    std::vector<std::vector<std::uint8_t>> dense_relu;
};

void ForwardCacheDeleter::operator()(ForwardCache* c) const { delete c; }

ForwardCachePtr make_cache() { return ForwardCachePtr(new ForwardCache()); }

struct Model::Impl {
    explicit Impl(const ModelConfig& c) : embedding(c.vocab_size, c.embed_dim) {
        std::size_t features = c.embed_dim;
        if (c.architecture == Architecture::ConvStack) {
            std::size_t in = c.embed_dim;
            for (const auto& spec : c.conv_layers) {
                convs.emplace_back(in, spec.out_channels, spec.kernel_size);
                in = spec.out_channels;
            }
            const std::size_t len = c.conv_output_len();
            const std::size_t pooled_len = c.pooling.window == 0 ? 1 : (len - c.pooling.window) / c.pooling.stride + 1;
            features = in * pooled_len;
        } else if (c.architecture == Architecture::Recurrent) {
            gru.emplace(c.embed_dim, c.recurrent_hidden);
            features = c.recurrent_hidden;
        }
        for (auto width : c.fc_sizes) {
            dense.emplace_back(features, width);
            features = width;
        }

        // Names and init order are part of the checkpoint format.
        embedding.table.name = "embedding.table";
        for (std::size_t i = 0; i < convs.size(); ++i) {
            convs[i].kernel.name = "conv" + std::to_string(i) + ".kernel";
            convs[i].bias.name = "conv" + std::to_string(i) + ".bias";
        }
        if (gru) {
            gru->w_ih.name = "gru.w_ih";
            gru->w_hh.name = "gru.w_hh";
            gru->b_ih.name = "gru.b_ih";
            gru->b_hh.name = "gru.b_hh";
        }
        for (std::size_t i = 0; i < dense.size(); ++i) {
            dense[i].weight.name = "dense" + std::to_string(i) + ".weight";
            dense[i].bias.name = "dense" + std::to_string(i) + ".bias";
        }

        std::mt19937_64 rng(c.seed);
        nn::init_uniform(embedding.table, 1, rng);
        for (auto& conv : convs) nn::init_uniform(conv.kernel, conv.in_channels() * conv.kernel_size(), rng);
        if (gru) {
            nn::init_uniform(gru->w_ih, gru->input_dim(), rng);
            nn::init_uniform(gru->w_hh, gru->hidden(), rng);
        }
        for (auto& d : dense) nn::init_uniform(d.weight, d.in_features(), rng);
    }

    std::vector<nn::Parameter*> parameters() {
        std::vector<nn::Parameter*> out{&embedding.table};
        for (auto& c : convs) {
            out.push_back(&c.kernel);
            out.push_back(&c.bias);
        }
        if (gru) {
            out.push_back(&gru->w_ih);
            out.push_back(&gru->w_hh);
            out.push_back(&gru->b_ih);
            out.push_back(&gru->b_hh);
        }
        for (auto& d : dense) {
            out.push_back(&d.weight);
            out.push_back(&d.bias);
        }
        return out;
    }

    nn::Embedding embedding;
    std::vector<nn::Conv1D> convs;
    std::optional<nn::Gru> gru;
    std::vector<nn::Dense> dense;
};

Model::Model(ModelConfig config) : config_(std::move(config)) {
    config_.check();
    impl_ = std::make_unique<Impl>(config_);
}

Model::~Model() = default;
Model::Model(const Model& other) : config_(other.config_), impl_(std::make_unique<Impl>(*other.impl_)) {}
Model& Model::operator=(const Model& other) {
    if (this != &other) {
        config_ = other.config_;
        impl_ = std::make_unique<Impl>(*other.impl_);
    }
    return *this;
}
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

std::vector<nn::Parameter*> Model::parameters() { return impl_->parameters(); }

std::vector<const nn::Parameter*> Model::parameters() const {
    auto ps = impl_->parameters();
    return {ps.begin(), ps.end()};
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->value.size();
    return n;
}

std::vector<double> Model::forward(std::span<const tok::TokenId> ids, std::size_t batch, ForwardCache* cache) const {
    const std::size_t len = config_.max_len;
    if (ids.size() != batch * len)
        throw LengthMismatch("model expects " + std::to_string(batch) + " sequences of length " + std::to_string(len));
    const Impl& net = *impl_;
    if (cache) {
        cache->ids.assign(ids.begin(), ids.end());
        cache->batch = batch;
        cache->len = len;
    }

    nn::DenseTensor x = net.embedding.forward(ids, batch, len);
    nn::DenseTensor features;
    switch (config_.architecture) {
        case Architecture::ConvStack: {
            if (cache) {
                cache->conv.assign(net.convs.size(), {});
                cache->conv_relu.assign(net.convs.size(), {});
            }
            for (std::size_t i = 0; i < net.convs.size(); ++i) {
                x = net.convs[i].forward(x, cache ? &cache->conv[i] : nullptr);
                x = nn::relu_forward(x, cache ? &cache->conv_relu[i] : nullptr);
            }
            x = nn::maxpool1d_forward(x, config_.pooling, cache ? &cache->pool : nullptr);
            if (cache) cache->pooled_shape = x.shape;
            const std::size_t width = x.size() / batch;
            features = nn::DenseTensor({batch, width}, std::move(x.values));
            break;
        }
        case Architecture::BagFC:
            features = nn::masked_mean_forward(x, ids, tok::kPad, cache ? &cache->counts : nullptr);
            break;
        case Architecture::Recurrent: {
            std::vector<std::size_t> lengths(batch);
            for (std::size_t b = 0; b < batch; ++b) {
                std::size_t n = 0;
                for (std::size_t t = 0; t < len; ++t)
                    if (ids[b * len + t] != tok::kPad) n = t + 1;
                lengths[b] = std::max<std::size_t>(n, 1);
            }
            features = net.gru->forward(x, lengths, cache ? &cache->gru : nullptr);
            break;
        }
    }

    if (cache) {
        cache->dense_inputs.assign(net.dense.size(), {});
        cache->dense_relu.assign(net.dense.size(), {});
    }
    for (std::size_t i = 0; i < net.dense.size(); ++i) {
        features = net.dense[i].forward(features, cache ? &cache->dense_inputs[i] : nullptr);
        if (i + 1 < net.dense.size()) features = nn::relu_forward(features, cache ? &cache->dense_relu[i] : nullptr);
    }
    return std::vector<double>(features.values.begin(), features.values.end());
}

void Model::backward(std::span<const double> d_out, ForwardCache& cache) {
    Impl& net = *impl_;
    const std::size_t batch = cache.batch;
    if (d_out.size() != batch) throw ShapeMismatch("backward: one output gradient per sequence required");
    nn::DenseTensor g({batch, 1}, std::vector<double>(d_out.begin(), d_out.end()));
    for (std::size_t i = net.dense.size(); i-- > 0;) {
        if (i + 1 < net.dense.size()) g = nn::relu_backward(g, cache.dense_relu[i]);
        g = net.dense[i].backward(g, cache.dense_inputs[i]);
    }

    nn::DenseTensor dx;
    switch (config_.architecture) {
        case Architecture::ConvStack: {
            g.shape = cache.pooled_shape;
            dx = nn::maxpool1d_backward(g, cache.pool);
            for (std::size_t i = net.convs.size(); i-- > 0;) {
                dx = nn::relu_backward(dx, cache.conv_relu[i]);
                dx = net.convs[i].backward(dx, cache.conv[i]);
            }
            break;
        }
        case Architecture::BagFC:
            dx = nn::masked_mean_backward(g, cache.ids, tok::kPad, cache.counts, cache.len);
            break;
        case Architecture::Recurrent:
            dx = net.gru->backward(g, cache.gru);
            break;
    }
    net.embedding.backward(cache.ids, dx);
}

std::uint64_t Model::branch_signature(const ForwardCache& cache) {
    std::string bytes;
    for (const auto& mask : cache.conv_relu) bytes.append(mask.begin(), mask.end());
    for (const auto& mask : cache.dense_relu) bytes.append(mask.begin(), mask.end());
    for (auto idx : cache.pool.argmax) bytes.append(reinterpret_cast<const char*>(&idx), sizeof(idx));
    return fnv1a64(bytes);
}

// ---------------------------------------------------------------------------
// Prediction

namespace {

void check_input(const Model& model, const tok::TokenSequence& s) {
    if (s.mode != model.config().mode)
        throw ModeMismatch("sequence tokenized as " + std::string(tok::mode_name(s.mode)) + " but model expects " +
                           std::string(tok::mode_name(model.config().mode)));
    if (s.ids.size() != model.config().max_len)
        throw LengthMismatch("sequence length " + std::to_string(s.ids.size()) + " but model expects " +
                             std::to_string(model.config().max_len));
}

double finish(const Model& model, double raw) {
    double y = model.config().target_norm.denormalize(raw);
    if (model.config().target_kind == data::TargetKind::XpuUtilization) y = std::clamp(y, 0.0, 1.0);
    return y;
}

}  // namespace

double predict(const Model& model, const tok::TokenSequence& s) {
    check_input(model, s);
    return finish(model, model.forward(s.ids, 1, nullptr).front());
}

std::vector<double> predict_batch(const Model& model, std::span<const tok::TokenSequence> seqs) {
    constexpr std::size_t kChunk = 64;
    std::vector<double> out;
    out.reserve(seqs.size());
    std::vector<tok::TokenId> ids;
    for (std::size_t start = 0; start < seqs.size(); start += kChunk) {
        const std::size_t n = std::min(kChunk, seqs.size() - start);
        ids.clear();
        for (std::size_t i = 0; i < n; ++i) {
            check_input(model, seqs[start + i]);
            ids.insert(ids.end(), seqs[start + i].ids.begin(), seqs[start + i].ids.end());
        }
        for (double raw : model.forward(ids, n, nullptr)) out.push_back(finish(model, raw));
    }
    return out;
}

std::int64_t round_prediction(double raw) { return std::max<std::int64_t>(0, std::llround(raw)); }

std::int64_t predict_rounded(const Model& model, const tok::TokenSequence& s) {
    return round_prediction(predict(model, s));
}

}  // namespace hwcost::model
