#pragma once

#include <random>

#include "hwcost/models.hpp"
#include "hwcost/nn.hpp"

namespace ref {

/// A scaled-down model of the given architecture, small enough to
/// finite-difference every parameter.
inline hwcost::model::ModelConfig small_config(hwcost::model::Architecture arch, std::uint64_t seed) {
    hwcost::model::ModelConfig c;
    c.architecture = arch;
    c.vocab_size = 12;
    c.embed_dim = 6;
    c.max_len = 14;
    c.conv_layers = std::vector<hwcost::model::ConvLayerSpec>(6, {6, 2});
    c.fc_sizes = {10, 6, 1};
    c.recurrent_hidden = 5;
    c.seed = seed;
    return c;
}

/// Gradient check of the whole network under MSE against random targets.
/// Targets are drawn near the output scale.
inline hwcost::nn::GradCheckResult check_model_gradient(hwcost::model::Model& m, std::uint64_t seed,
                                                        std::size_t batch = 1) {
    using namespace hwcost;
    std::mt19937_64 rng(seed);
    const auto& c = m.config();
    std::uniform_int_distribution<int> len_dist(3, static_cast<int>(c.max_len));
    std::uniform_int_distribution<int> tok_dist(1, static_cast<int>(c.vocab_size) - 1);
    std::normal_distribution<double> target_dist(0.0, 0.1);
    std::vector<tok::TokenId> ids(batch * c.max_len, tok::kPad);
    std::vector<double> targets(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const int n = len_dist(rng);
        for (int t = 0; t < n; ++t) ids[b * c.max_len + t] = tok_dist(rng);
        targets[b] = target_dist(rng);
    }

    auto cache = model::make_cache();
    nn::GradCheckProblem prob;
    prob.params = m.parameters();
    prob.loss = [&] { return nn::mse_loss(m.forward(ids, batch, cache.get()), targets, nullptr); };
    prob.gradient = [&] {
        for (auto* p : prob.params) p->zero_grad();
        std::vector<double> g;
        nn::mse_loss(m.forward(ids, batch, cache.get()), targets, &g);
        m.backward(g, *cache);
    };
    prob.branch_signature = [&] { return model::Model::branch_signature(*cache); };
    return nn::grad_check(prob);
}

}  // namespace ref
