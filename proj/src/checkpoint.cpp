#include "hwcost/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "hwcost/error.hpp"
#include "hwcost/util.hpp"

namespace hwcost::ckpt {

namespace {

constexpr std::string_view kMagic = "HWCOSTCK";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
public:
    template <typename T>
    void pod(T v) {
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        out_.append(buf, sizeof(T));
    }
    void text(std::string_view s) {
        pod<std::uint64_t>(s.size());
        out_.append(s);
    }
    void tensor(const std::string& name, const nn::DenseTensor& t) {
        pod<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
        out_.append(name);
        pod<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) pod<std::uint64_t>(d);
        out_.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
    }
    std::string& str() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    template <typename T>
    T pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, in_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::string text() { return std::string(bytes(pod<std::uint64_t>())); }
    void tensor_into(const std::string& expected_name, nn::DenseTensor& t) {
        const auto name = std::string(bytes(pod<std::uint32_t>()));
        if (name != expected_name)
            throw CheckpointError("expected tensor `" + expected_name + "`, found `" + name + "`");
        const auto rank = pod<std::uint32_t>();
        std::vector<std::size_t> shape;
        for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(pod<std::uint64_t>());
        if (shape != t.shape)
            throw CheckpointError("tensor `" + name + "` has shape " + nn::shape_string(shape) + ", model expects " +
                                  nn::shape_string(t.shape));
        auto raw = bytes(t.size() * sizeof(double));
        std::memcpy(t.data(), raw.data(), raw.size());
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw CheckpointError("checkpoint is truncated");
    }
    std::string_view in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const Checkpoint& c) {
    Writer w;
    w.str().append(kMagic);
    w.pod<std::uint32_t>(kFormatVersion);
    w.text(c.model.config().to_text());
    const std::string vocab_text = c.vocab.to_text();
    w.pod<std::uint64_t>(fnv1a64(vocab_text));
    w.text(vocab_text);
    const auto params = c.model.parameters();
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
    for (const auto* p : params) w.tensor(p->name, p->value);
    w.pod<std::uint8_t>(c.optimizer ? 1 : 0);
    if (c.optimizer) {
        w.pod<std::int64_t>(c.optimizer->step);
        for (std::size_t i = 0; i < params.size(); ++i) {
            w.tensor("adam.m." + params[i]->name, c.optimizer->m.at(i));
            w.tensor("adam.v." + params[i]->name, c.optimizer->v.at(i));
        }
    }
    return std::move(w.str());
}

Checkpoint deserialize(std::string_view bytes) {
    Reader r(bytes);
    if (r.bytes(kMagic.size()) != kMagic) throw CheckpointError("not a checkpoint file (bad magic)");
    const auto version = r.pod<std::uint32_t>();
    if (version != kFormatVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (reader is version " +
                              std::to_string(kFormatVersion) + ")");
    model::ModelConfig config;
    try {
        config = model::ModelConfig::from_text(r.text());
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("bad model config in checkpoint: ") + e.what());
    }
    const auto stored_hash = r.pod<std::uint64_t>();
    const std::string vocab_text = r.text();
    if (fnv1a64(vocab_text) != stored_hash) throw CheckpointError("vocabulary hash mismatch inside checkpoint");
    auto vocab = tok::Vocabulary::from_text(vocab_text);
    if (vocab.size() != config.vocab_size)
        throw CheckpointError("vocabulary has " + std::to_string(vocab.size()) + " entries, model expects " +
                              std::to_string(config.vocab_size));

    Checkpoint c{model::Model(config), std::move(vocab), std::nullopt};
    auto params = c.model.parameters();
    if (r.pod<std::uint32_t>() != params.size()) throw CheckpointError("parameter count mismatch");
    for (auto* p : params) r.tensor_into(p->name, p->value);
    if (r.pod<std::uint8_t>()) {
        nn::AdamState st;
        st.step = r.pod<std::int64_t>();
        for (auto* p : params) {
            st.m.emplace_back(p->value.shape);
            st.v.emplace_back(p->value.shape);
            r.tensor_into("adam.m." + p->name, st.m.back());
            r.tensor_into("adam.v." + p->name, st.v.back());
        }
        c.optimizer = std::move(st);
    }
    if (!r.done()) throw CheckpointError("trailing bytes after checkpoint");
    return c;
}

void save(const Checkpoint& c, const std::string& path) { write_file(path, serialize(c)); }

Checkpoint load(const std::string& path, const tok::Vocabulary* expected_vocab) {
    auto c = deserialize(read_file(path));
    if (expected_vocab && expected_vocab->hash() != c.vocab.hash())
        throw CheckpointError("checkpoint was trained with a different vocabulary");
    return c;
}

}  // namespace hwcost::ckpt
