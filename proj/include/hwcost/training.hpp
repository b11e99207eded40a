#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hwcost/dataset.hpp"
#include "hwcost/models.hpp"
#include "hwcost/nn.hpp"
#include "hwcost/tokenizer.hpp"

namespace hwcost::train {

enum class OptimizerKind { Sgd, Adam };

enum class Normalization { Auto, None, ZScore };  // Auto: z-score for register pressure only

struct TrainConfig {
    std::size_t epochs = 60;
    std::size_t batch_size = 32;
    OptimizerKind optimizer = OptimizerKind::Adam;
    nn::AdamHyper adam;  // lr is shared with SGD
    std::uint64_t seed = 1;
    std::size_t early_stop_patience = 10;
    Normalization normalization = Normalization::Auto;
    /// Called after every epoch (progress reporting); may be empty.
    std::function<void(std::size_t epoch, double train_rmse, double val_rmse)> on_epoch;

    void check() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_rmse = 0.0;
    double val_rmse = 0.0;
};

struct TrainResult {
    model::Model model;
    nn::AdamState optimizer;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_rmse = 0.0;
};

/// Tokenized, padded inputs with labels, ready for batching.
struct EncodedSet {
    std::vector<tok::TokenSequence> inputs;
    std::vector<double> labels;
    data::TargetKind kind = data::TargetKind::RegisterPressure;
};

/// Throws MixedTargets, EmptyDataset, ValidationError.
EncodedSet encode(std::span<const data::Sample> samples, const tok::Vocabulary& vocab, tok::Mode mode,
                  std::size_t max_len);

/// Minimizes MSE on normalized targets with shuffled mini-batches and returns
/// the parameters with the best validation RMSE. The model's mode, max_len and
/// target kind must agree with the data. Throws MixedTargets, EmptyDataset, ConfigError.
TrainResult train(model::Model model, std::span<const data::Sample> train_samples,
                  std::span<const data::Sample> val_samples, const TrainConfig& cfg, const tok::Vocabulary& vocab);

struct EvalReport {
    std::size_t n = 0;
    data::TargetKind kind = data::TargetKind::RegisterPressure;
    double rmse = 0.0;
    double rmse_pct_of_range = 0.0;
    std::optional<double> exact_match_pct;  // register pressure only
    /// Register pressure: |rounded prediction - label|. Utilization: absolute
    /// error in whole percentage points.
    std::map<std::int64_t, std::size_t> error_histogram;

    /// `name = value` lines.
    std::string to_text() const;
};

/// Metrics from predictions and labels directly.
EvalReport make_report(std::span<const double> predictions, std::span<const double> labels, data::TargetKind kind);

/// Throws MixedTargets, EmptyDataset.
EvalReport evaluate(const model::Model& model, std::span<const data::Sample> samples, const tok::Vocabulary& vocab);
EvalReport evaluate(const model::Model& model, const EncodedSet& set);

std::string history_to_text(std::span<const EpochRecord> history);

struct ComparisonRow {
    std::string label;
    model::Architecture architecture;
    EvalReport test;
    std::size_t best_epoch = 0;
};

/// Trains every config on the same splits and seed; rows sorted by test RMSE
/// (stable on ties). Throws ConfigError with fewer than two configs unless
/// allow_single is set.
std::vector<ComparisonRow> compare_architectures(const data::Split& split,
                                                 std::span<const model::ModelConfig> configs,
                                                 const TrainConfig& cfg, const tok::Vocabulary& vocab,
                                                 bool allow_single = false);

std::string comparison_table(std::span<const ComparisonRow> rows);

}  // namespace hwcost::train
