#include "hwcost/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "hwcost/error.hpp"
#include "hwcost/util.hpp"

namespace hwcost::data {

using ir::OpCode;
using ir::TensorShape;

std::string_view target_kind_name(TargetKind k) {
    return k == TargetKind::RegisterPressure ? "RegisterPressure" : "XpuUtilization";
}

TargetKind target_kind_from_name(std::string_view name) {
    if (name == "RegisterPressure" || name == "register-pressure") return TargetKind::RegisterPressure;
    if (name == "XpuUtilization" || name == "xpu-utilization") return TargetKind::XpuUtilization;
    throw ConfigError("unknown target kind `" + std::string(name) + "` (register-pressure | xpu-utilization)");
}

double compute_target(const ir::GraphFunction& f, TargetKind kind, const oracle::MachineConfig& m) {
    if (kind == TargetKind::RegisterPressure) return static_cast<double>(oracle::register_pressure(f, m));
    return oracle::vector_alu_utilization(f, m).value();
}

ir::GraphFunction check_sample(const Sample& s) {
    ir::GraphFunction f;
    try {
        f = ir::parse_function(s.ir_text);
    } catch (const Error& e) {
        throw ValidationError(std::string("ir_text does not parse: ") + e.what());
    }
    if (ir::shape_summary(f) != s.shape_summary)
        throw ValidationError("shape_summary `" + s.shape_summary + "` disagrees with ir_text (`" +
                              ir::shape_summary(f) + "`)");
    if (!(s.target_value >= 0.0)) throw ValidationError("target_value must be >= 0");
    if (s.target_kind == TargetKind::XpuUtilization && s.target_value > 1.0)
        throw ValidationError("utilization target_value must be <= 1");
    if (s.target_kind == TargetKind::RegisterPressure && s.target_value != std::floor(s.target_value))
        throw ValidationError("register pressure target_value must be an integer");
    return f;
}

// ---------------------------------------------------------------------------
// Generation

std::vector<TensorShape> GeneratorConfig::default_shape_pool() {
    static const char* kShapes[] = {
        "tensor<1x128x128xf32>", "tensor<16xf32>",        "tensor<256xf32>",      "tensor<8x16xf32>",
        "tensor<32x32xf32>",     "tensor<64x128xf32>",    "tensor<16x64xf32>",    "tensor<1x64x64xf32>",
        "tensor<128xf16>",       "tensor<16x16xf16>",     "tensor<32x64xf16>",    "tensor<64x64xf16>",
        "tensor<128x128xf16>",   "tensor<1x32x32xf16>",   "tensor<8x256xf16>",    "tensor<1x16x128xf16>",
        "tensor<256xi8>",        "tensor<32x32xi8>",      "tensor<64x256xi8>",    "tensor<128x128xi8>",
        "tensor<8x8xi8>",        "tensor<1x256x256xi8>",  "tensor<16x128xi8>",    "tensor<1x8x8xi8>",
    };
    std::vector<TensorShape> pool;
    for (const char* s : kShapes) pool.push_back(*TensorShape::parse(s));
    return pool;
}

std::map<OpCode, double> GeneratorConfig::default_opcode_weights() {
    std::map<OpCode, double> w;
    for (auto op : ir::kAllOpCodes) w[op] = 1.0;
    w[OpCode::Mult] = 2.0;
    w[OpCode::Add] = 2.0;
    return w;
}

void GeneratorConfig::check() const {
    if (op_count_min < 1 || op_count_min > op_count_max) throw ConfigError("op_count_range must be non-empty and >= 1");
    if (arg_count_min < 1 || arg_count_min > arg_count_max) throw ConfigError("arg_count_range must be non-empty and >= 1");
    if (shape_pool.empty()) throw ConfigError("shape_pool must be non-empty");
    for (const auto& s : shape_pool)
        if (!TensorShape::parse(s.str())) throw ConfigError("shape_pool entry " + s.str() + " is malformed");
    if (opcode_weights.empty()) throw ConfigError("opcode_weights must be non-empty");
    for (const auto& [op, w] : opcode_weights)
        if (!(w > 0.0)) throw ConfigError("opcode weight for " + ir::qualified_name(op) + " must be positive");
}

namespace {

struct ScopeValue {
    std::string id;
    TensorShape shape;
};

class FunctionBuilder {
public:
    FunctionBuilder(const GeneratorConfig& cfg, std::mt19937_64& rng) : cfg_(cfg), rng_(rng) {}

    ir::GraphFunction build(std::size_t index) {
        f_.name = "g" + std::to_string(index);
        const auto n_args = uniform(cfg_.arg_count_min, cfg_.arg_count_max);
        for (std::size_t i = 0; i < n_args; ++i) add_arg(cfg_.shape_pool[uniform(0, cfg_.shape_pool.size() - 1)]);

        std::vector<OpCode> ops;
        std::vector<double> weights;
        for (const auto& [op, w] : cfg_.opcode_weights) {
            ops.push_back(op);
            weights.push_back(w);
        }
        std::discrete_distribution<std::size_t> pick_op(weights.begin(), weights.end());

        const auto n_ops = uniform(cfg_.op_count_min, cfg_.op_count_max);
        for (std::size_t i = 0; i < n_ops; ++i) add_op(ops[pick_op(rng_)]);

        std::set<std::string> used;
        for (const auto& op : f_.body)
            for (const auto& id : op.operand_ids) used.insert(id);
        for (const auto& op : f_.body)
            if (!used.count(op.result_id)) f_.returns.push_back(op.result_id);
        return std::move(f_);
    }

private:
    std::size_t uniform(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }

    const ScopeValue& add_arg(const TensorShape& shape) {
        ir::Argument a{"%arg" + std::to_string(f_.args.size()), shape};
        f_.args.push_back(a);
        scope_.push_back({a.id, shape});
        return scope_.back();
    }

    template <typename Pred>
    std::vector<std::size_t> candidates(Pred pred) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < scope_.size(); ++i)
            if (pred(scope_[i])) out.push_back(i);
        return out;
    }

    ScopeValue pick_or_insert(const std::vector<std::size_t>& cands, const TensorShape& fallback) {
        if (cands.empty()) return add_arg(fallback);
        return scope_[cands[uniform(0, cands.size() - 1)]];
    }

    void add_op(OpCode op) {
        const bool needs_matrix = op == OpCode::Matmul || op == OpCode::Transpose;
        auto rank_ok = [&](const TensorShape& s) { return !needs_matrix || s.rank() >= 2; };

        auto firsts = candidates([&](const ScopeValue& v) { return rank_ok(v.shape); });
        if (firsts.empty()) {
            std::vector<TensorShape> pool;
            for (const auto& s : cfg_.shape_pool)
                if (rank_ok(s)) pool.push_back(s);
            if (pool.empty()) {
                op = OpCode::Copy;
                firsts = candidates([](const ScopeValue&) { return true; });
            } else {
                add_arg(pool[uniform(0, pool.size() - 1)]);
                firsts = {scope_.size() - 1};
            }
        }
        ScopeValue a = scope_[firsts[uniform(0, firsts.size() - 1)]];

        ir::OperationNode node;
        node.opcode = op;
        node.operand_ids.push_back(a.id);
        node.operand_shapes.push_back(a.shape);

        if (ir::arity(op) == 2) {
            ScopeValue b;
            if (op == OpCode::Matmul) {
                const auto r = a.shape.rank();
                const auto k = a.shape.dims[r - 1];
                auto cands = candidates([&](const ScopeValue& v) {
                    if (v.shape.rank() != r || v.shape.dtype != a.shape.dtype || v.shape.dims[r - 2] != k) return false;
                    return std::equal(a.shape.dims.begin(), a.shape.dims.end() - 2, v.shape.dims.begin());
                });
                TensorShape fresh = a.shape;
                static constexpr std::int64_t kCols[] = {16, 32, 64, 128};
                fresh.dims[r - 2] = k;
                fresh.dims[r - 1] = kCols[uniform(0, 3)];
                b = pick_or_insert(cands, fresh);
            } else {
                auto cands = candidates([&](const ScopeValue& v) { return v.id != a.id && v.shape == a.shape; });
                b = pick_or_insert(cands, a.shape);
            }
            node.operand_ids.push_back(b.id);
            node.operand_shapes.push_back(b.shape);
        }

        if (op == OpCode::Reshape) {
            node.result_shape = reshape_target(a.shape);
        } else {
            node.result_shape = *ir::infer_result_shape(op, node.operand_shapes);
        }
        node.result_id = "%" + std::to_string(f_.body.size());
        scope_.push_back({node.result_id, node.result_shape});
        f_.body.push_back(std::move(node));
    }

    TensorShape reshape_target(const TensorShape& in) {
        std::vector<TensorShape> options;
        for (const auto& s : cfg_.shape_pool)
            if (s.dtype == in.dtype && s.element_count() == in.element_count() && s.dims != in.dims) options.push_back(s);
        if (!options.empty()) return options[uniform(0, options.size() - 1)];
        TensorShape out = in;
        const auto n = static_cast<std::int64_t>(in.element_count());
        out.dims = in.rank() > 1 ? std::vector<std::int64_t>{n} : std::vector<std::int64_t>{1, n};
        return out;
    }

    const GeneratorConfig& cfg_;
    std::mt19937_64& rng_;
    ir::GraphFunction f_;
    std::vector<ScopeValue> scope_;
};

}  // namespace

ir::GraphFunction generate_function(const GeneratorConfig& config, std::size_t index) {
    std::mt19937_64 rng(derive_seed(config.seed, index));
    return FunctionBuilder(config, rng).build(index);
}

std::vector<Sample> generate(const GeneratorConfig& config, const oracle::MachineConfig& machine) {
    config.check();
    machine.check();
    std::vector<Sample> out;
    out.reserve(config.num_samples * 2);
    for (std::size_t i = 0; i < config.num_samples; ++i) {
        auto f = generate_function(config, i);
        auto text = ir::emit_text(f);
        auto summary = ir::shape_summary(f);
        auto cost = oracle::evaluate(f, machine);
        out.push_back({text, summary, TargetKind::RegisterPressure, static_cast<double>(cost.register_pressure)});
        out.push_back({std::move(text), std::move(summary), TargetKind::XpuUtilization, cost.xpu_utilization.value()});
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

constexpr std::string_view kHeader = "ir_text,shape_summary,target_kind,target_value";

std::string quote(std::string_view field) {
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// RFC 4180 rows; quoted fields may span lines.
std::vector<std::vector<std::string>> csv_rows(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    std::size_t i = 0;
    std::size_t line = 1;
    bool in_quotes = false;
    bool field_started = false;
    while (i < text.size()) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
        } else if (c == '"') {
            if (!field.empty())
                throw CsvFormatError("row " + std::to_string(rows.size() + 1) + ", column " +
                                     std::to_string(row.size() + 1) + ": stray quote inside unquoted field");
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            ++line;
            if (field_started || !field.empty() || !row.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            field_started = false;
        } else {
            field += c;
        }
        ++i;
    }
    if (in_quotes)
        throw CsvFormatError("row " + std::to_string(rows.size() + 1) + ": unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::string to_csv(std::span<const Sample> samples) {
    std::string out(kHeader);
    out += '\n';
    for (const auto& s : samples) {
        out += quote(s.ir_text);
        out += ',';
        out += quote(s.shape_summary);
        out += ',';
        out += target_kind_name(s.target_kind);
        out += ',';
        out += format_double(s.target_value);
        out += '\n';
    }
    return out;
}

void write_csv(std::span<const Sample> samples, const std::string& path) {
    for (const auto& s : samples) check_sample(s);
    write_file(path, to_csv(samples));
}

std::vector<Sample> parse_csv(std::string_view text) {
    auto rows = csv_rows(text);
    if (rows.empty()) throw CsvFormatError("row 1: missing header");
    std::string header;
    for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
    if (header != kHeader) throw CsvFormatError("row 1: header must be `" + std::string(kHeader) + "`");

    std::vector<Sample> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string where = "row " + std::to_string(r + 1);
        if (row.size() != 4)
            throw CsvFormatError(where + ", column " + std::to_string(std::min<std::size_t>(row.size() + 1, 5)) +
                                 ": expected 4 columns, found " + std::to_string(row.size()));
        Sample s;
        s.ir_text = row[0];
        s.shape_summary = row[1];
        if (row[2] == "RegisterPressure")
            s.target_kind = TargetKind::RegisterPressure;
        else if (row[2] == "XpuUtilization")
            s.target_kind = TargetKind::XpuUtilization;
        else
            throw CsvFormatError(where + ", column 3: unknown target_kind `" + row[2] + "`");
        try {
            s.target_value = parse_double(row[3]);
        } catch (const ConfigError&) {
            throw CsvFormatError(where + ", column 4: target_value `" + row[3] + "` is not a number");
        }
        try {
            check_sample(s);
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Sample> load_csv(const std::string& path) { return parse_csv(read_file(path)); }

// ---------------------------------------------------------------------------
// Augmentation

AugmentPolicy augment_policy_from_name(std::string_view name) {
    if (name == "rename-only" || name == "RenameOnly") return AugmentPolicy::RenameOnly;
    if (name == "reorder-recompute" || name == "ReorderRecompute") return AugmentPolicy::ReorderRecompute;
    throw ConfigError("unknown augmentation policy `" + std::string(name) + "` (rename-only | reorder-recompute)");
}

ir::GraphFunction random_reorder(const ir::GraphFunction& f, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto deps = ir::operand_def_indices(f);
    const std::size_t n = f.body.size();
    std::vector<std::size_t> pending(n, 0);
    std::vector<std::vector<std::size_t>> users(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::set<int> distinct(deps[i].begin(), deps[i].end());
        for (int d : distinct) {
            if (d < 0) continue;
            ++pending[i];
            users[static_cast<std::size_t>(d)].push_back(i);
        }
    }
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (pending[i] == 0) ready.push_back(i);
    ir::GraphFunction out = f;
    out.body.clear();
    while (!ready.empty()) {
        const auto pick = std::uniform_int_distribution<std::size_t>(0, ready.size() - 1)(rng);
        const auto i = ready[pick];
        ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(pick));
        out.body.push_back(f.body[i]);
        for (auto u : users[i])
            if (--pending[u] == 0) ready.push_back(u);
    }
    return ir::canonicalize(out);
}

namespace {

ir::GraphFunction random_rename(const ir::GraphFunction& f, std::mt19937_64& rng) {
    std::vector<std::size_t> result_ids(f.body.size() * 8 + 8);
    std::iota(result_ids.begin(), result_ids.end(), 0);
    std::shuffle(result_ids.begin(), result_ids.end(), rng);
    std::vector<std::size_t> arg_ids(f.args.size());
    std::iota(arg_ids.begin(), arg_ids.end(), 0);
    std::shuffle(arg_ids.begin(), arg_ids.end(), rng);

    std::unordered_map<std::string, std::string> rename;
    for (std::size_t i = 0; i < f.args.size(); ++i) rename[f.args[i].id] = "%arg" + std::to_string(arg_ids[i]);
    for (std::size_t i = 0; i < f.body.size(); ++i) rename[f.body[i].result_id] = "%" + std::to_string(result_ids[i]);

    ir::GraphFunction out = f;
    for (auto& a : out.args) a.id = rename.at(a.id);
    for (auto& op : out.body) {
        op.result_id = rename.at(op.result_id);
        for (auto& id : op.operand_ids) id = rename.at(id);
    }
    for (auto& r : out.returns) r = rename.at(r);
    return out;
}

}  // namespace

std::vector<Sample> augment(std::span<const Sample> samples, AugmentPolicy policy, std::size_t factor,
                            const oracle::MachineConfig& machine, std::uint64_t seed) {
    if (factor < 1) throw ConfigError("augmentation factor must be >= 1");
    std::vector<Sample> out(samples.begin(), samples.end());
    if (factor == 1) return out;

    for (std::size_t s = 0; s < samples.size(); ++s) {
        const Sample& base = samples[s];
        const auto f = check_sample(base);
        std::mt19937_64 rng(derive_seed(seed, s));
        std::set<std::string> seen{base.ir_text, ir::emit_text(f)};
        std::size_t made = 0;
        for (std::size_t attempt = 0; attempt < 4 * (factor - 1) && made < factor - 1; ++attempt) {
            Sample variant = base;
            if (policy == AugmentPolicy::RenameOnly) {
                variant.ir_text = ir::emit_text_verbatim(random_rename(f, rng));
            } else {
                auto g = random_reorder(f, rng());
                variant.ir_text = ir::emit_text(g);
                variant.target_value = compute_target(g, base.target_kind, machine);
            }
            if (!seen.insert(variant.ir_text).second) continue;
            out.push_back(std::move(variant));
            ++made;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Splitting

Split split(std::span<const Sample> samples, std::array<double, 3> ratios, std::uint64_t seed) {
    for (double r : ratios)
        if (!(r > 0.0)) throw ConfigError("split ratios must be positive");
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");

    const std::size_t n = samples.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[0]));
    auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1]));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);

    Split out;
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& s = samples[order[i]];
        if (i < n_train)
            out.train.push_back(s);
        else if (i < n_train + n_val)
            out.val.push_back(s);
        else
            out.test.push_back(s);
    }
    return out;
}

std::vector<Sample> filter_kind(std::span<const Sample> samples, TargetKind kind) {
    std::vector<Sample> out;
    for (const auto& s : samples)
        if (s.target_kind == kind) out.push_back(s);
    return out;
}

}  // namespace hwcost::data
