#include "hwcost/tokenizer.hpp"

#include "hwcost/error.hpp"
#include "hwcost/util.hpp"

namespace hwcost::tok {

namespace {

constexpr std::string_view kReserved[kNumReserved] = {"<pad>", "<oov>", "<bos>", "<eos>"};

TokenSequence to_sequence(const std::vector<std::string>& tokens, const Vocabulary& v, Mode mode) {
    TokenSequence s;
    s.mode = mode;
    s.ids.reserve(tokens.size() + 2);
    s.ids.push_back(kBos);
    for (const auto& t : tokens) s.ids.push_back(v.lookup(t));
    s.ids.push_back(kEos);
    s.source_len = s.ids.size();
    return s;
}

}  // namespace

std::string_view mode_name(Mode m) { return m == Mode::OpsOnly ? "ops-only" : "ops-and-operands"; }

Mode mode_from_name(std::string_view name) {
    if (name == "ops-only") return Mode::OpsOnly;
    if (name == "ops-and-operands") return Mode::OpsAndOperands;
    throw ConfigError("unknown tokenization mode `" + std::string(name) + "` (ops-only | ops-and-operands)");
}

std::size_t default_max_len(Mode m) { return m == Mode::OpsOnly ? 112 : 256; }

Vocabulary::Vocabulary() {
    for (auto r : kReserved) add(std::string(r));
}

TokenId Vocabulary::add(const std::string& token) {
    auto [it, inserted] = token_to_id_.emplace(token, static_cast<TokenId>(id_to_token_.size()));
    if (inserted) id_to_token_.push_back(token);
    return it->second;
}

TokenId Vocabulary::lookup(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? kOov : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return token_to_id_.count(std::string(token)) != 0; }

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
        throw IdOutOfRange("token id " + std::to_string(id) + " outside vocabulary of size " +
                           std::to_string(id_to_token_.size()));
    return id_to_token_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::to_text() const {
    std::string out;
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) out += std::to_string(i) + "\t" + id_to_token_[i] + "\n";
    return out;
}

Vocabulary Vocabulary::from_text(std::string_view text) {
    Vocabulary v;
    std::size_t expected = 0;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos)
            throw VocabFormatError("vocabulary line " + std::to_string(line_no) + ": expected `<id>\\t<token>`");
        std::int64_t id = -1;
        try {
            id = parse_int(line.substr(0, tab));
        } catch (const ConfigError&) {
            throw VocabFormatError("vocabulary line " + std::to_string(line_no) + ": bad id");
        }
        if (id != static_cast<std::int64_t>(expected))
            throw VocabFormatError("vocabulary line " + std::to_string(line_no) + ": id " + std::to_string(id) +
                                   " breaks contiguity (expected " + std::to_string(expected) + ")");
        std::string token(line.substr(tab + 1));
        if (token.empty()) throw VocabFormatError("vocabulary line " + std::to_string(line_no) + ": empty token");
        if (expected < kNumReserved) {
            if (token != kReserved[expected])
                throw VocabFormatError("vocabulary id " + std::to_string(expected) + " must be reserved token " +
                                       std::string(kReserved[expected]));
        } else if (v.contains(token)) {
            throw VocabFormatError("vocabulary line " + std::to_string(line_no) + ": duplicate token " + token);
        } else {
            v.add(token);
        }
        ++expected;
    }
    if (expected < kNumReserved) throw VocabFormatError("vocabulary is missing reserved ids 0-3");
    return v;
}

Vocabulary Vocabulary::load(const std::string& path) { return from_text(read_file(path)); }

void Vocabulary::save(const std::string& path) const { write_file(path, to_text()); }

std::uint64_t Vocabulary::hash() const { return fnv1a64(to_text()); }

std::vector<std::string> token_strings(const ir::GraphFunction& f, Mode mode) {
    std::vector<std::string> out;
    for (const auto& a : f.args) out.push_back(a.shape.str());

    if (mode == Mode::OpsOnly) {
        for (const auto& op : f.body) {
            out.push_back(ir::qualified_name(op.opcode));
            out.push_back(op.result_shape.str());
        }
    } else {
        std::unordered_map<std::string_view, std::size_t> arg_pos;
        std::unordered_map<std::string_view, std::size_t> def_pos;
        for (std::size_t j = 0; j < f.args.size(); ++j) arg_pos[f.args[j].id] = j;
        for (std::size_t i = 0; i < f.body.size(); ++i) {
            const auto& op = f.body[i];
            out.emplace_back(kDefToken);
            out.push_back(ir::qualified_name(op.opcode));
            for (const auto& id : op.operand_ids) {
                if (auto it = def_pos.find(id); it != def_pos.end())
                    out.push_back("@-" + std::to_string(i - it->second));
                else if (auto a = arg_pos.find(id); a != arg_pos.end())
                    out.push_back("@arg" + std::to_string(a->second));
                else
                    out.push_back("@?");
            }
            out.push_back(op.result_shape.str());
            def_pos[op.result_id] = i;
        }
    }

    for (const auto& s : f.return_shapes()) out.push_back(s.str());
    return out;
}

Vocabulary build_vocab(std::span<const ir::GraphFunction> corpus, Mode mode, std::size_t min_freq) {
    if (corpus.empty()) throw EmptyCorpus("cannot build a vocabulary from an empty corpus");
    if (min_freq < 1) throw ConfigError("min_freq must be >= 1");
    std::vector<std::string> order;
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& f : corpus) {
        for (auto& t : token_strings(f, mode)) {
            auto [it, inserted] = freq.emplace(t, 0);
            if (inserted) order.push_back(t);
            ++it->second;
        }
    }
    Vocabulary v;
    for (const auto& t : order)
        if (freq[t] >= min_freq) v.add(t);
    return v;
}

TokenSequence tokenize_ops_only(const ir::GraphFunction& f, const Vocabulary& v) {
    return to_sequence(token_strings(f, Mode::OpsOnly), v, Mode::OpsOnly);
}

TokenSequence tokenize_ops_operands(const ir::GraphFunction& f, const Vocabulary& v) {
    return to_sequence(token_strings(f, Mode::OpsAndOperands), v, Mode::OpsAndOperands);
}

TokenSequence tokenize(const ir::GraphFunction& f, const Vocabulary& v, Mode mode) {
    return mode == Mode::OpsOnly ? tokenize_ops_only(f, v) : tokenize_ops_operands(f, v);
}

TokenSequence pad_or_truncate(const TokenSequence& s, std::size_t max_len) {
    if (max_len < 2) throw ConfigError("max_len must be >= 2");
    TokenSequence out = s;
    if (out.ids.size() > max_len) {
        out.ids.resize(max_len);
        out.ids.back() = kEos;
    } else {
        out.ids.resize(max_len, kPad);
    }
    return out;
}

}  // namespace hwcost::tok
