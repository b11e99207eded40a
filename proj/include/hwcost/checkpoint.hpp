#pragma once

#include <optional>
#include <string>

#include "hwcost/models.hpp"
#include "hwcost/nn.hpp"
#include "hwcost/tokenizer.hpp"

namespace hwcost::ckpt {

inline constexpr std::uint32_t kFormatVersion = 1;

/// Everything needed to resume training or serve predictions.
struct Checkpoint {
    model::Model model;
    tok::Vocabulary vocab;
    std::optional<nn::AdamState> optimizer;
};

/// Layout (all integers little-endian):
///   "HWCOSTCK" | u32 version | u64 len + ModelConfig text | u64 vocab hash |
///   u64 len + vocabulary text | u32 count, then per tensor:
///   u32 len + name | u32 rank | u64 dims... | f64 values... |
///   u8 has_optimizer [ i64 step | moment tensors "adam.m.<p>", "adam.v.<p>" ]
std::string serialize(const Checkpoint& c);
/// Throws CheckpointError on bad magic, version, hash or truncation.
Checkpoint deserialize(std::string_view bytes);

void save(const Checkpoint& c, const std::string& path);
/// When expected_vocab is given its hash must match the stored one.
Checkpoint load(const std::string& path, const tok::Vocabulary* expected_vocab = nullptr);

}  // namespace hwcost::ckpt
