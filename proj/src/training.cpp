#include "hwcost/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "hwcost/error.hpp"
#include "hwcost/util.hpp"

namespace hwcost::train {

void TrainConfig::check() const {
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (early_stop_patience == 0) throw ConfigError("early_stop_patience must be positive");
}

EncodedSet encode(std::span<const data::Sample> samples, const tok::Vocabulary& vocab, tok::Mode mode,
                  std::size_t max_len) {
    if (samples.empty()) throw EmptyDataset("no samples");
    EncodedSet set;
    set.kind = samples.front().target_kind;
    set.inputs.reserve(samples.size());
    set.labels.reserve(samples.size());
    for (const auto& s : samples) {
        if (s.target_kind != set.kind)
            throw MixedTargets("samples mix " + std::string(data::target_kind_name(set.kind)) + " and " +
                               std::string(data::target_kind_name(s.target_kind)));
        auto f = ir::parse_function(s.ir_text);
        set.inputs.push_back(tok::pad_or_truncate(tok::tokenize(f, vocab, mode), max_len));
        set.labels.push_back(s.target_value);
    }
    return set;
}

namespace {

model::TargetNorm fit_norm(const std::vector<double>& labels, Normalization policy, data::TargetKind kind) {
    const bool zscore = policy == Normalization::ZScore ||
                        (policy == Normalization::Auto && kind == data::TargetKind::RegisterPressure);
    if (!zscore) return {};
    const double n = static_cast<double>(labels.size());
    const double mean = std::accumulate(labels.begin(), labels.end(), 0.0) / n;
    double var = 0.0;
    for (double y : labels) var += (y - mean) * (y - mean);
    const double std = std::sqrt(var / n);
    return {true, mean, std > 0.0 ? std : 1.0};
}

std::vector<nn::Buffer> snapshot(const model::Model& m) {
    std::vector<nn::Buffer> out;
    for (const auto* p : m.parameters()) out.push_back(p->value.values);
    return out;
}

void restore(model::Model& m, const std::vector<nn::Buffer>& values) {
    auto ps = m.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value.values = values[i];
}

double rmse(std::span<const double> pred, std::span<const double> labels) {
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i] - labels[i]) * (pred[i] - labels[i]);
    return std::sqrt(sum / static_cast<double>(pred.size()));
}

}  // namespace

TrainResult train(model::Model model, std::span<const data::Sample> train_samples,
                  std::span<const data::Sample> val_samples, const TrainConfig& cfg, const tok::Vocabulary& vocab) {
    cfg.check();
    const auto& mc = model.config();
    if (mc.vocab_size != vocab.size())
        throw ConfigError("model vocab_size " + std::to_string(mc.vocab_size) + " but vocabulary has " +
                          std::to_string(vocab.size()) + " entries");
    EncodedSet tr = encode(train_samples, vocab, mc.mode, mc.max_len);
    std::optional<EncodedSet> va;
    if (!val_samples.empty()) {
        va = encode(val_samples, vocab, mc.mode, mc.max_len);
        if (va->kind != tr.kind) throw MixedTargets("training and validation sets have different target kinds");
    }
    if (tr.kind != mc.target_kind)
        throw MixedTargets("model targets " + std::string(data::target_kind_name(mc.target_kind)) + " but data is " +
                           std::string(data::target_kind_name(tr.kind)));

    model.set_target_norm(fit_norm(tr.labels, cfg.normalization, tr.kind));
    const model::TargetNorm norm = model.config().target_norm;
    const std::size_t len = mc.max_len;

    TrainResult result{model, {}, {}, 0, 0.0};
    model::Model& net = result.model;
    auto params = net.parameters();
    auto cache = model::make_cache();

    std::vector<std::size_t> order(tr.inputs.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<tok::TokenId> ids;
    std::vector<double> targets, grad;
    std::vector<nn::Buffer> best_values = snapshot(net);
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(cfg.seed, epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double sq_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t b = std::min(cfg.batch_size, order.size() - start);
            ids.clear();
            targets.clear();
            for (std::size_t i = 0; i < b; ++i) {
                const auto& seq = tr.inputs[order[start + i]];
                ids.insert(ids.end(), seq.ids.begin(), seq.ids.end());
                targets.push_back(norm.normalize(tr.labels[order[start + i]]));
            }
            for (auto* p : params) p->zero_grad();
            auto out = net.forward(std::span(ids.data(), b * len), b, cache.get());
            nn::mse_loss(out, targets, &grad);
            net.backward(grad, *cache);
            if (cfg.optimizer == OptimizerKind::Adam)
                nn::adam_step(params, result.optimizer, cfg.adam);
            else
                nn::sgd_step(params, cfg.adam.lr);
            for (std::size_t i = 0; i < b; ++i) {
                const double d = norm.denormalize(out[i]) - norm.denormalize(targets[i]);
                sq_sum += d * d;
            }
        }
        const double train_rmse = std::sqrt(sq_sum / static_cast<double>(order.size()));
        const double val_rmse = va ? evaluate(net, *va).rmse : train_rmse;
        result.history.push_back({epoch, train_rmse, val_rmse});
        if (cfg.on_epoch) cfg.on_epoch(epoch, train_rmse, val_rmse);

        if (val_rmse < best) {
            best = val_rmse;
            best_values = snapshot(net);
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.early_stop_patience) {
            break;
        }
    }
    restore(net, best_values);
    result.best_val_rmse = best;
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalReport make_report(std::span<const double> predictions, std::span<const double> labels, data::TargetKind kind) {
    if (predictions.empty()) throw EmptyDataset("nothing to evaluate");
    if (predictions.size() != labels.size()) throw ShapeMismatch("one prediction per label required");
    EvalReport r;
    r.n = labels.size();
    r.kind = kind;
    r.rmse = rmse(predictions, labels);
    const auto [lo, hi] = std::minmax_element(labels.begin(), labels.end());
    const double range = *hi - *lo;
    r.rmse_pct_of_range = range > 0.0 ? r.rmse / range * 100.0 : (r.rmse == 0.0 ? 0.0 : INFINITY);

    std::size_t exact = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::int64_t bucket;
        if (kind == data::TargetKind::RegisterPressure) {
            bucket = std::llabs(model::round_prediction(predictions[i]) - std::llround(labels[i]));
            if (bucket == 0) ++exact;
        } else {
            bucket = std::llround(std::abs(predictions[i] - labels[i]) * 100.0);
        }
        ++r.error_histogram[bucket];
    }
    if (kind == data::TargetKind::RegisterPressure)
        r.exact_match_pct = 100.0 * static_cast<double>(exact) / static_cast<double>(r.n);
    return r;
}

EvalReport evaluate(const model::Model& model, const EncodedSet& set) {
    if (set.inputs.empty()) throw EmptyDataset("nothing to evaluate");
    if (set.kind != model.config().target_kind)
        throw MixedTargets("model targets " + std::string(data::target_kind_name(model.config().target_kind)) +
                           " but data is " + std::string(data::target_kind_name(set.kind)));
    auto pred = model::predict_batch(model, set.inputs);
    return make_report(pred, set.labels, set.kind);
}

EvalReport evaluate(const model::Model& model, std::span<const data::Sample> samples, const tok::Vocabulary& vocab) {
    return evaluate(model, encode(samples, vocab, model.config().mode, model.config().max_len));
}

std::string EvalReport::to_text() const {
    KeyValueMap kv;
    kv.set("n", std::to_string(n));
    kv.set("target_kind", std::string(data::target_kind_name(kind)));
    kv.set("rmse", format_double(rmse));
    kv.set("rmse_pct_of_range", format_double(rmse_pct_of_range));
    if (exact_match_pct) kv.set("exact_match_pct", format_double(*exact_match_pct));
    for (const auto& [err, count] : error_histogram)
        kv.set("error_histogram." + std::to_string(err), std::to_string(count));
    return kv.to_text();
}

std::string history_to_text(std::span<const EpochRecord> history) {
    std::string out;
    for (const auto& h : history)
        out += "epoch " + std::to_string(h.epoch) + " train_rmse " + format_double(h.train_rmse) + " val_rmse " +
               format_double(h.val_rmse) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Architecture comparison

std::vector<ComparisonRow> compare_architectures(const data::Split& split, std::span<const model::ModelConfig> configs,
                                                 const TrainConfig& cfg, const tok::Vocabulary& vocab,
                                                 bool allow_single) {
    if (configs.empty() || (configs.size() < 2 && !allow_single))
        throw ConfigError("compare_architectures needs at least two configs");
    std::vector<ComparisonRow> rows;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto& c = configs[i];
        auto trained = train(model::Model(c), split.train, split.val, cfg, vocab);
        std::string label(model::architecture_name(c.architecture));
        if (c.mode == tok::Mode::OpsAndOperands) label += "/operands";
        rows.push_back({label, c.architecture, evaluate(trained.model, split.test, vocab), trained.best_epoch});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ComparisonRow& a, const ComparisonRow& b) { return a.test.rmse < b.test.rmse; });
    return rows;
}

std::string comparison_table(std::span<const ComparisonRow> rows) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-4s %-22s %14s %12s %12s %10s\n", "rank", "model", "test_rmse", "pct_range",
                  "exact_pct", "best_ep");
    out += line;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        std::string exact = r.test.exact_match_pct ? format_double(std::round(*r.test.exact_match_pct * 100) / 100) : "-";
        std::snprintf(line, sizeof(line), "%-4zu %-22s %14.6g %12.4f %12s %10zu\n", i + 1, r.label.c_str(), r.test.rmse,
                      r.test.rmse_pct_of_range, exact.c_str(), r.best_epoch);
        out += line;
    }
    return out;
}

}  // namespace hwcost::train
