#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hwcost/ir.hpp"

namespace hwcost::tok {

enum class Mode { OpsOnly, OpsAndOperands };

std::string_view mode_name(Mode m);  // "ops-only" / "ops-and-operands"
Mode mode_from_name(std::string_view name);
/// Default fixed input length per mode.
std::size_t default_max_len(Mode m);

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kOov = 1;
inline constexpr TokenId kBos = 2;
inline constexpr TokenId kEos = 3;
inline constexpr std::size_t kNumReserved = 4;

/// Marks the definition slot of an op in operand-aware sequences.
inline constexpr std::string_view kDefToken = "<def>";

class Vocabulary {
public:
    /// Only the four reserved entries.
    Vocabulary();

    /// Appends `token` if absent and returns its id.
    TokenId add(const std::string& token);
    /// Id of `token`, or kOov if absent.
    TokenId lookup(std::string_view token) const;
    bool contains(std::string_view token) const;
    const std::string& token(TokenId id) const;
    std::size_t size() const { return id_to_token_.size(); }

    /// `<id>\t<token>` lines sorted by id.
    std::string to_text() const;
    static Vocabulary from_text(std::string_view text);
    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;
    std::uint64_t hash() const;

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.id_to_token_ == b.id_to_token_; }

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, TokenId> token_to_id_;
};

struct TokenSequence {
    std::vector<TokenId> ids;
    Mode mode = Mode::OpsOnly;
    std::size_t source_len = 0;

    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Token strings (without BOS/EOS) for a function under the given mode.
std::vector<std::string> token_strings(const ir::GraphFunction& f, Mode mode);

Vocabulary build_vocab(std::span<const ir::GraphFunction> corpus, Mode mode, std::size_t min_freq);

TokenSequence tokenize_ops_only(const ir::GraphFunction& f, const Vocabulary& v);
TokenSequence tokenize_ops_operands(const ir::GraphFunction& f, const Vocabulary& v);
TokenSequence tokenize(const ir::GraphFunction& f, const Vocabulary& v, Mode mode);

/// Right-pads with PAD or truncates (keeping BOS, forcing a final EOS) to exactly max_len.
TokenSequence pad_or_truncate(const TokenSequence& s, std::size_t max_len);

}  // namespace hwcost::tok
