#include "hwcost/oracle.hpp"

#include <algorithm>
#include <unordered_map>

#include "hwcost/error.hpp"
#include "hwcost/util.hpp"

namespace hwcost::oracle {

namespace {

void require_valid(const ir::GraphFunction& f) {
    if (auto v = ir::validate(f); !v.empty()) throw InvalidFunction("oracle needs a valid function: " + v.front().message);
}

ir::OpCode parse_op(std::string_view name) {
    auto op = ir::opcode_from_name(trim(name));
    if (!op) throw ConfigError("unknown opcode `" + std::string(name) + "` in machine config");
    return *op;
}

}  // namespace

std::map<ir::OpCode, std::int64_t> MachineConfig::default_slot_costs() {
    std::map<ir::OpCode, std::int64_t> costs;
    for (auto op : ir::kAllOpCodes) costs[op] = 1;
    costs[ir::OpCode::Matmul] = 4;
    return costs;
}

void MachineConfig::check() const {
    if (register_width_bytes <= 0) throw ConfigError("register_width_bytes must be positive");
    for (auto op : ir::kAllOpCodes) {
        auto it = slot_cost.find(op);
        if (it == slot_cost.end()) throw ConfigError("missing slot_cost for " + ir::qualified_name(op));
        if (it->second <= 0) throw ConfigError("slot_cost for " + ir::qualified_name(op) + " must be positive");
    }
}

std::string MachineConfig::to_text() const {
    KeyValueMap kv;
    kv.set("register_width_bytes", std::to_string(register_width_bytes));
    std::string ops;
    for (auto op : ir::kAllOpCodes) {
        if (!vector_alu_ops.count(op)) continue;
        if (!ops.empty()) ops += ", ";
        ops += ir::opcode_name(op);
    }
    kv.set("vector_alu_ops", ops);
    for (auto op : ir::kAllOpCodes) kv.set("slot_cost." + std::string(ir::opcode_name(op)), std::to_string(slot_cost.at(op)));
    return kv.to_text();
}

MachineConfig MachineConfig::from_text(std::string_view text) {
    MachineConfig m;
    auto kv = KeyValueMap::parse(text);
    for (const auto& [key, value] : kv.entries()) {
        if (key == "register_width_bytes") {
            m.register_width_bytes = kv.get_int(key);
        } else if (key == "vector_alu_ops") {
            m.vector_alu_ops.clear();
            if (!value.empty())
                for (const auto& name : split(value, ',')) m.vector_alu_ops.insert(parse_op(name));
        } else if (key.rfind("slot_cost.", 0) == 0) {
            m.slot_cost[parse_op(key.substr(10))] = kv.get_int(key);
        } else {
            throw ConfigError("unknown machine config key `" + key + "`");
        }
    }
    m.check();
    return m;
}

MachineConfig MachineConfig::load(const std::string& path) { return from_text(read_file(path)); }

std::uint64_t footprint(const ir::TensorShape& shape, const MachineConfig& m) {
    const auto width = static_cast<std::uint64_t>(m.register_width_bytes);
    return (shape.byte_size() + width - 1) / width;
}

std::uint64_t register_pressure(const ir::GraphFunction& f, const MachineConfig& m) {
    require_valid(f);
    const int n = static_cast<int>(f.body.size());
    constexpr int kDead = -2;

    // Interval per value: [start, end] in op indices; args start at -1 (entry).
    struct Interval {
        int start;
        int end;
        std::uint64_t size;
    };
    std::unordered_map<std::string_view, Interval> live;
    for (const auto& a : f.args) live[a.id] = {-1, kDead, footprint(a.shape, m)};
    for (int i = 0; i < n; ++i) {
        const auto& op = f.body[static_cast<std::size_t>(i)];
        for (const auto& id : op.operand_ids) live[id].end = i;
        live[op.result_id] = {i, kDead, footprint(op.result_shape, m)};
    }
    for (const auto& r : f.returns) live[r].end = n;

    // Sweep: +size at start, -size after end.
    std::vector<std::int64_t> delta(static_cast<std::size_t>(n) + 3, 0);
    auto slot = [](int p) { return static_cast<std::size_t>(p + 1); };
    for (const auto& [id, iv] : live) {
        if (iv.end == kDead) continue;
        delta[slot(iv.start)] += static_cast<std::int64_t>(iv.size);
        delta[slot(iv.end) + 1] -= static_cast<std::int64_t>(iv.size);
    }
    std::int64_t current = 0;
    std::int64_t peak = 0;
    for (std::size_t p = 0; p < delta.size(); ++p) {
        current += delta[p];
        peak = std::max(peak, current);
    }
    return static_cast<std::uint64_t>(peak);
}

Utilization vector_alu_utilization(const ir::GraphFunction& f, const MachineConfig& m) {
    require_valid(f);
    Utilization u;
    for (const auto& op : f.body) {
        const auto cost = m.slot_cost.at(op.opcode);
        u.total_slots += cost;
        if (m.vector_alu_ops.count(op.opcode)) u.vector_slots += cost;
    }
    return u;
}

CostReport evaluate(const ir::GraphFunction& f, const MachineConfig& m) {
    return {register_pressure(f, m), vector_alu_utilization(f, m)};
}

}  // namespace hwcost::oracle
