#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hwcost/ir.hpp"
#include "hwcost/oracle.hpp"

namespace hwcost::data {

enum class TargetKind { RegisterPressure, XpuUtilization };

std::string_view target_kind_name(TargetKind k);  // "RegisterPressure" / "XpuUtilization"
/// Accepts the CSV names and the CLI spellings register-pressure / xpu-utilization.
TargetKind target_kind_from_name(std::string_view name);

struct Sample {
    std::string ir_text;
    std::string shape_summary;
    TargetKind target_kind = TargetKind::RegisterPressure;
    double target_value = 0.0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// Oracle value for one target kind.
double compute_target(const ir::GraphFunction& f, TargetKind kind, const oracle::MachineConfig& m);

/// Parses, validates, and checks shape_summary and target bounds. Throws ValidationError.
ir::GraphFunction check_sample(const Sample& s);

struct GeneratorConfig {
    std::size_t num_samples = 1000;  // functions; each yields one sample per target kind
    std::size_t op_count_min = 3;
    std::size_t op_count_max = 40;
    std::size_t arg_count_min = 1;
    std::size_t arg_count_max = 3;
    std::vector<ir::TensorShape> shape_pool = default_shape_pool();
    std::map<ir::OpCode, double> opcode_weights = default_opcode_weights();
    std::uint64_t seed = 7;

    static std::vector<ir::TensorShape> default_shape_pool();
    static std::map<ir::OpCode, double> default_opcode_weights();

    void check() const;
};

/// One random function; deterministic in (config.seed, index).
ir::GraphFunction generate_function(const GeneratorConfig& config, std::size_t index);

/// num_samples functions, emitted as a RegisterPressure and an XpuUtilization sample each.
std::vector<Sample> generate(const GeneratorConfig& config, const oracle::MachineConfig& machine);

void write_csv(std::span<const Sample> samples, const std::string& path);
std::string to_csv(std::span<const Sample> samples);
std::vector<Sample> load_csv(const std::string& path);
std::vector<Sample> parse_csv(std::string_view text);

enum class AugmentPolicy { RenameOnly, ReorderRecompute };

AugmentPolicy augment_policy_from_name(std::string_view name);  // rename-only / reorder-recompute

/// Input samples followed by up to factor-1 distinct variants of each.
std::vector<Sample> augment(std::span<const Sample> samples, AugmentPolicy policy, std::size_t factor,
                            const oracle::MachineConfig& machine, std::uint64_t seed);

/// A random topological order of f's body, canonically renumbered.
ir::GraphFunction random_reorder(const ir::GraphFunction& f, std::uint64_t seed);

struct Split {
    std::vector<Sample> train;
    std::vector<Sample> val;
    std::vector<Sample> test;
};

Split split(std::span<const Sample> samples, std::array<double, 3> ratios, std::uint64_t seed);

/// Samples of one kind, order preserved.
std::vector<Sample> filter_kind(std::span<const Sample> samples, TargetKind kind);

}  // namespace hwcost::data
