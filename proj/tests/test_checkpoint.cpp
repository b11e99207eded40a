#include <doctest.h>

#include <filesystem>

#include "hwcost/checkpoint.hpp"
#include "hwcost/error.hpp"
#include "reference.hpp"

using namespace hwcost;

namespace {

ckpt::Checkpoint sample_checkpoint(bool with_optimizer) {
    std::vector<ir::GraphFunction> corpus{ir::parse_function(ref::kFig2), ir::parse_function(ref::kCopy)};
    auto vocab = tok::build_vocab(corpus, tok::Mode::OpsOnly, 1);
    model::ModelConfig c;
    c.vocab_size = vocab.size();
    c.embed_dim = 8;
    c.max_len = 16;
    c.conv_layers = {{8, 3}, {8, 2}};
    c.fc_sizes = {8, 1};
    c.target_norm = {true, 12.5, 3.25};
    model::Model m(c);
    std::optional<nn::AdamState> opt;
    if (with_optimizer) {
        nn::AdamState st;
        auto ps = m.parameters();
        for (auto* p : ps) p->grad.fill(0.25);
        nn::adam_step(ps, st, {});
        opt = st;
    }
    return {m, vocab, opt};
}

}  // namespace

TEST_CASE("checkpoint round trip") {
    for (bool with_opt : {false, true}) {
        auto c = sample_checkpoint(with_opt);
        auto bytes = ckpt::serialize(c);
        auto back = ckpt::deserialize(bytes);
        CHECK(back.model.config() == c.model.config());
        CHECK(back.vocab == c.vocab);
        auto a = c.model.parameters();
        auto b = back.model.parameters();
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i]->name == b[i]->name);
            CHECK(a[i]->value == b[i]->value);
        }
        CHECK(back.optimizer.has_value() == with_opt);
        if (with_opt) {
            CHECK(back.optimizer->step == c.optimizer->step);
            CHECK(back.optimizer->m == c.optimizer->m);
            CHECK(back.optimizer->v == c.optimizer->v);
        }
        CHECK(ckpt::serialize(back) == bytes);
    }
}

TEST_CASE("checkpoint file io and corruption") {
    auto c = sample_checkpoint(false);
    const auto path = (std::filesystem::temp_directory_path() / "hwcost_test.ckpt").string();
    ckpt::save(c, path);
    auto back = ckpt::load(path, &c.vocab);
    CHECK(back.vocab == c.vocab);

    auto other = c.vocab;
    other.add("extra");
    CHECK_THROWS_AS(ckpt::load(path, &other), CheckpointError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(ckpt::load(path), IoError);

    auto bytes = ckpt::serialize(c);
    CHECK_THROWS_AS(ckpt::deserialize(bytes.substr(0, bytes.size() / 2)), CheckpointError);
    CHECK_THROWS_AS(ckpt::deserialize("NOTACKPT" + bytes.substr(8)), CheckpointError);
    auto bad_version = bytes;
    bad_version[8] = 7;
    CHECK_THROWS_AS(ckpt::deserialize(bad_version), CheckpointError);
    CHECK_THROWS_AS(ckpt::deserialize(""), CheckpointError);
    CHECK_THROWS_AS(ckpt::deserialize(bytes + "x"), CheckpointError);
}
