#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hwcost::ir {

enum class DType { F32, F16, BF16, I32, I8 };

std::string_view dtype_name(DType t);
std::optional<DType> dtype_from_name(std::string_view name);
std::int64_t dtype_bytes(DType t);

struct TensorShape {
    std::vector<std::int64_t> dims;
    DType dtype = DType::F32;

    std::size_t rank() const { return dims.size(); }
    std::uint64_t element_count() const;
    std::uint64_t byte_size() const { return element_count() * static_cast<std::uint64_t>(dtype_bytes(dtype)); }

    /// Canonical `tensor<DxDx...xDTYPE>` form.
    std::string str() const;
    /// Parses the canonical form; nullopt on any malformation.
    static std::optional<TensorShape> parse(std::string_view text);

    friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

enum class OpCode {
    Mult,
    Add,
    Sub,
    Matmul,
    Relu,
    Sigmoid,
    Tanh,
    ReduceSum,
    Transpose,
    Reshape,
    Copy,
    Load,
    Store,
};

inline constexpr std::array<OpCode, 13> kAllOpCodes = {
    OpCode::Mult,      OpCode::Add,       OpCode::Sub,     OpCode::Matmul, OpCode::Relu,
    OpCode::Sigmoid,   OpCode::Tanh,      OpCode::ReduceSum, OpCode::Transpose,
    OpCode::Reshape,   OpCode::Copy,      OpCode::Load,    OpCode::Store,
};

/// Unqualified name, e.g. "mult".
std::string_view opcode_name(OpCode op);
/// Qualified name, e.g. "xpu.mult".
std::string qualified_name(OpCode op);
/// Accepts both "mult" and "xpu.mult".
std::optional<OpCode> opcode_from_name(std::string_view name);
std::size_t arity(OpCode op);
bool is_elementwise(OpCode op);

/// Checks the opcode's shape rule. Returns a description of the violation,
/// or nullopt when `result` is the shape the rule admits. Never throws.
std::optional<std::string> shape_rule_violation(OpCode op, std::span<const TensorShape> operands,
                                                const TensorShape& result);

/// Result shape for every opcode except Reshape (whose result is free up to
/// element count); nullopt when the operands violate the rule.
std::optional<TensorShape> infer_result_shape(OpCode op, std::span<const TensorShape> operands);

struct OperationNode {
    std::string result_id;  // "%3"
    OpCode opcode = OpCode::Copy;
    std::vector<std::string> operand_ids;
    std::vector<TensorShape> operand_shapes;
    TensorShape result_shape;

    friend bool operator==(const OperationNode&, const OperationNode&) = default;
};

struct Argument {
    std::string id;  // "%arg0"
    TensorShape shape;

    friend bool operator==(const Argument&, const Argument&) = default;
};

struct GraphFunction {
    std::string name;
    std::vector<Argument> args;
    std::vector<OperationNode> body;
    std::vector<std::string> returns;

    /// Shape of a defined value, if any.
    const TensorShape* shape_of(std::string_view id) const;
    std::vector<TensorShape> return_shapes() const;

    friend bool operator==(const GraphFunction&, const GraphFunction&) = default;
};

enum class ViolationKind { Syntax, UnknownOpcode, ArityMismatch, ShapeRuleViolation, SsaViolation };

std::string_view violation_kind_name(ViolationKind k);

struct Violation {
    ViolationKind kind;
    int op_index;  // -1 for function-level problems (args, returns, empty body)
    std::string message;
};

/// Every invariant violation in `f`; empty iff `f` is well formed.
std::vector<Violation> validate(const GraphFunction& f);

/// Throws the typed error matching the first violation, if any.
void throw_if_invalid(const GraphFunction& f);

/// Parses one function. Throws SyntaxError, UnknownOpcode, ArityMismatch,
/// ShapeRuleViolation or SsaViolation.
GraphFunction parse_function(std::string_view text);

/// Renames arguments to %arg0.. by position and results to %0.. in body order.
GraphFunction canonicalize(const GraphFunction& f);

/// Canonical text (dense renumbering). Throws InvalidFunction if `f` is invalid.
std::string emit_text(const GraphFunction& f);

/// Same layout as emit_text but keeps the value names of `f` as they are.
std::string emit_text_verbatim(const GraphFunction& f);

/// "in,in->out,out" summary of the function's boundary shapes.
std::string shape_summary(const GraphFunction& f);

/// For each body op, the op indices that define its operands (-1 for arguments).
std::vector<std::vector<int>> operand_def_indices(const GraphFunction& f);

}  // namespace hwcost::ir
