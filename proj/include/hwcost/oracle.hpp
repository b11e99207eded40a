#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "hwcost/ir.hpp"

namespace hwcost::oracle {

struct MachineConfig {
    std::int64_t register_width_bytes = 64;
    std::set<ir::OpCode> vector_alu_ops = {ir::OpCode::Mult,    ir::OpCode::Add,  ir::OpCode::Sub,
                                           ir::OpCode::Relu,    ir::OpCode::Sigmoid, ir::OpCode::Tanh,
                                           ir::OpCode::ReduceSum};
    std::map<ir::OpCode, std::int64_t> slot_cost = default_slot_costs();

    static std::map<ir::OpCode, std::int64_t> default_slot_costs();

    /// Throws ConfigError when an invariant does not hold.
    void check() const;

    /// `key = value` lines: register_width_bytes, vector_alu_ops (comma list), slot_cost.<op>.
    std::string to_text() const;
    /// Missing keys keep their defaults.
    static MachineConfig from_text(std::string_view text);
    static MachineConfig load(const std::string& path);

    friend bool operator==(const MachineConfig&, const MachineConfig&) = default;
};

/// Vector-ALU slots over total slots, kept exact.
struct Utilization {
    std::int64_t vector_slots = 0;
    std::int64_t total_slots = 0;

    double value() const { return total_slots == 0 ? 0.0 : static_cast<double>(vector_slots) / total_slots; }
    friend bool operator==(const Utilization& a, const Utilization& b) {
        return a.vector_slots * b.total_slots == b.vector_slots * a.total_slots;
    }
};

struct CostReport {
    std::uint64_t register_pressure = 0;
    Utilization xpu_utilization;
};

/// Registers needed to hold one value of this shape.
std::uint64_t footprint(const ir::TensorShape& shape, const MachineConfig& m);

/// Peak footprint-weighted live set over the straight-line body. A value is
/// live from its definition (function entry for arguments) through its last
/// use, or through the end when returned; an unused, unreturned value
/// occupies no registers. Throws InvalidFunction.
std::uint64_t register_pressure(const ir::GraphFunction& f, const MachineConfig& m);

/// Throws InvalidFunction.
Utilization vector_alu_utilization(const ir::GraphFunction& f, const MachineConfig& m);

CostReport evaluate(const ir::GraphFunction& f, const MachineConfig& m);

}  // namespace hwcost::oracle
