#include "hwcost/ir.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <unordered_map>
#include <unordered_set>

#include "hwcost/error.hpp"

namespace hwcost::ir {

namespace {

constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 48;
constexpr std::int64_t kMaxDim = std::int64_t{1} << 31;

struct OpInfo {
    OpCode op;
    std::string_view name;
    std::size_t arity;
    bool elementwise;
};

constexpr std::array<OpInfo, 13> kOpTable = {{
    {OpCode::Mult, "mult", 2, true},
    {OpCode::Add, "add", 2, true},
    {OpCode::Sub, "sub", 2, true},
    {OpCode::Matmul, "matmul", 2, false},
    {OpCode::Relu, "relu", 1, true},
    {OpCode::Sigmoid, "sigmoid", 1, true},
    {OpCode::Tanh, "tanh", 1, true},
    {OpCode::ReduceSum, "reduce_sum", 1, false},
    {OpCode::Transpose, "transpose", 1, false},
    {OpCode::Reshape, "reshape", 1, false},
    {OpCode::Copy, "copy", 1, true},
    {OpCode::Load, "load", 1, true},
    {OpCode::Store, "store", 2, true},
}};

const OpInfo& info(OpCode op) { return kOpTable[static_cast<std::size_t>(op)]; }

bool is_result_name(std::string_view id) {
    if (id.size() < 2 || id[0] != '%') return false;
    return std::all_of(id.begin() + 1, id.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

bool is_arg_name(std::string_view id) {
    if (id.size() < 5 || id.substr(0, 4) != "%arg") return false;
    return std::all_of(id.begin() + 4, id.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

bool shape_well_formed(const TensorShape& s) {
    if (s.dims.empty()) return false;
    std::uint64_t n = 1;
    for (auto d : s.dims) {
        if (d < 1 || d > kMaxDim) return false;
        n *= static_cast<std::uint64_t>(d);
        if (n > kMaxElements) return false;
    }
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Types

std::string_view dtype_name(DType t) {
    switch (t) {
        case DType::F32: return "f32";
        case DType::F16: return "f16";
        case DType::BF16: return "bf16";
        case DType::I32: return "i32";
        case DType::I8: return "i8";
    }
    return "?";
}

std::optional<DType> dtype_from_name(std::string_view name) {
    for (auto t : {DType::F32, DType::F16, DType::BF16, DType::I32, DType::I8})
        if (dtype_name(t) == name) return t;
    return std::nullopt;
}

std::int64_t dtype_bytes(DType t) {
    switch (t) {
        case DType::F32:
        case DType::I32: return 4;
        case DType::F16:
        case DType::BF16: return 2;
        case DType::I8: return 1;
    }
    return 0;
}

std::uint64_t TensorShape::element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= static_cast<std::uint64_t>(d);
    return n;
}

std::string TensorShape::str() const {
    std::string out = "tensor<";
    for (auto d : dims) {
        out += std::to_string(d);
        out += 'x';
    }
    out += dtype_name(dtype);
    out += '>';
    return out;
}

std::optional<TensorShape> TensorShape::parse(std::string_view text) {
    constexpr std::string_view prefix = "tensor<";
    if (text.size() <= prefix.size() + 1 || text.substr(0, prefix.size()) != prefix || text.back() != '>')
        return std::nullopt;
    std::string_view inner = text.substr(prefix.size(), text.size() - prefix.size() - 1);
    TensorShape shape;
    while (true) {
        auto x = inner.find('x');
        if (x == std::string_view::npos) break;
        std::string_view dim = inner.substr(0, x);
        std::int64_t d = 0;
        auto res = std::from_chars(dim.data(), dim.data() + dim.size(), d);
        if (dim.empty() || res.ec != std::errc() || res.ptr != dim.data() + dim.size()) return std::nullopt;
        shape.dims.push_back(d);
        inner.remove_prefix(x + 1);
    }
    auto dtype = dtype_from_name(inner);
    if (!dtype) return std::nullopt;
    shape.dtype = *dtype;
    if (!shape_well_formed(shape)) return std::nullopt;
    return shape;
}

std::string_view opcode_name(OpCode op) { return info(op).name; }

std::string qualified_name(OpCode op) { return "xpu." + std::string(info(op).name); }

std::optional<OpCode> opcode_from_name(std::string_view name) {
    if (name.substr(0, 4) == "xpu.") name.remove_prefix(4);
    for (const auto& i : kOpTable)
        if (i.name == name) return i.op;
    return std::nullopt;
}

std::size_t arity(OpCode op) { return info(op).arity; }

bool is_elementwise(OpCode op) { return info(op).elementwise; }

std::optional<TensorShape> infer_result_shape(OpCode op, std::span<const TensorShape> operands) {
    if (operands.size() != arity(op)) return std::nullopt;
    for (const auto& s : operands)
        if (!shape_well_formed(s)) return std::nullopt;
    switch (op) {
        case OpCode::Mult:
        case OpCode::Add:
        case OpCode::Sub:
        case OpCode::Store:
            if (operands[0] != operands[1]) return std::nullopt;
            return operands[0];
        case OpCode::Relu:
        case OpCode::Sigmoid:
        case OpCode::Tanh:
        case OpCode::Copy:
        case OpCode::Load:
            return operands[0];
        case OpCode::Matmul: {
            const auto& a = operands[0];
            const auto& b = operands[1];
            const auto r = a.rank();
            if (r < 2 || b.rank() != r || a.dtype != b.dtype) return std::nullopt;
            if (!std::equal(a.dims.begin(), a.dims.end() - 2, b.dims.begin())) return std::nullopt;
            if (a.dims[r - 1] != b.dims[r - 2]) return std::nullopt;
            TensorShape out = a;
            out.dims[r - 1] = b.dims[r - 1];
            return out;
        }
        case OpCode::ReduceSum: {
            TensorShape out = operands[0];
            out.dims.back() = 1;
            return out;
        }
        case OpCode::Transpose: {
            if (operands[0].rank() < 2) return std::nullopt;
            TensorShape out = operands[0];
            std::swap(out.dims[out.rank() - 1], out.dims[out.rank() - 2]);
            return out;
        }
        case OpCode::Reshape:
            return std::nullopt;
    }
    return std::nullopt;
}

std::optional<std::string> shape_rule_violation(OpCode op, std::span<const TensorShape> operands,
                                                const TensorShape& result) {
    const std::string name = qualified_name(op);
    if (operands.size() != arity(op))
        return name + " expects " + std::to_string(arity(op)) + " operand shapes, got " +
               std::to_string(operands.size());
    for (const auto& s : operands)
        if (!shape_well_formed(s)) return name + ": malformed operand shape " + s.str();
    if (!shape_well_formed(result)) return name + ": malformed result shape " + result.str();

    if (op == OpCode::Reshape) {
        const auto& in = operands[0];
        if (in.dtype != result.dtype) return name + " cannot change element type";
        if (in.element_count() != result.element_count())
            return name + " must preserve element count (" + in.str() + " -> " + result.str() + ")";
        return std::nullopt;
    }
    auto expected = infer_result_shape(op, operands);
    if (!expected) {
        std::string shapes;
        for (const auto& s : operands) shapes += (shapes.empty() ? "" : ", ") + s.str();
        return name + " is not defined for operands (" + shapes + ")";
    }
    if (*expected != result) return name + " yields " + expected->str() + ", annotated " + result.str();
    return std::nullopt;
}

const TensorShape* GraphFunction::shape_of(std::string_view id) const {
    for (const auto& a : args)
        if (a.id == id) return &a.shape;
    for (const auto& op : body)
        if (op.result_id == id) return &op.result_shape;
    return nullptr;
}

std::vector<TensorShape> GraphFunction::return_shapes() const {
    std::vector<TensorShape> out;
    for (const auto& r : returns) {
        const TensorShape* s = shape_of(r);
        out.push_back(s ? *s : TensorShape{});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Validation

std::string_view violation_kind_name(ViolationKind k) {
    switch (k) {
        case ViolationKind::Syntax: return "SyntaxError";
        case ViolationKind::UnknownOpcode: return "UnknownOpcode";
        case ViolationKind::ArityMismatch: return "ArityMismatch";
        case ViolationKind::ShapeRuleViolation: return "ShapeRuleViolation";
        case ViolationKind::SsaViolation: return "SsaViolation";
    }
    return "?";
}

std::vector<Violation> validate(const GraphFunction& f) {
    std::vector<Violation> out;
    std::unordered_map<std::string_view, const TensorShape*> defined;
    std::unordered_set<std::string_view> later_defs;
    for (const auto& op : f.body) later_defs.insert(op.result_id);

    for (const auto& a : f.args) {
        if (!is_arg_name(a.id))
            out.push_back({ViolationKind::SsaViolation, -1, "argument name `" + a.id + "` is not %arg<k>"});
        if (!shape_well_formed(a.shape))
            out.push_back({ViolationKind::ShapeRuleViolation, -1, "argument " + a.id + " has malformed shape"});
        if (!defined.emplace(a.id, &a.shape).second)
            out.push_back({ViolationKind::SsaViolation, -1, "argument " + a.id + " defined twice"});
    }
    if (f.body.empty()) out.push_back({ViolationKind::Syntax, -1, "function body is empty"});

    for (std::size_t i = 0; i < f.body.size(); ++i) {
        const auto& op = f.body[i];
        const int idx = static_cast<int>(i);
        bool operands_ok = true;
        if (op.operand_ids.size() != arity(op.opcode) || op.operand_shapes.size() != op.operand_ids.size()) {
            out.push_back({ViolationKind::ArityMismatch, idx,
                           qualified_name(op.opcode) + " takes " + std::to_string(arity(op.opcode)) +
                               " operands, got " + std::to_string(op.operand_ids.size())});
            operands_ok = false;
        }
        for (std::size_t k = 0; k < op.operand_ids.size(); ++k) {
            const auto& id = op.operand_ids[k];
            auto it = defined.find(id);
            if (it == defined.end()) {
                out.push_back({ViolationKind::SsaViolation, idx,
                               later_defs.count(id) ? "use of " + id + " before its definition"
                                                    : "use of undefined value " + id});
                operands_ok = false;
            } else if (k < op.operand_shapes.size() && *it->second != op.operand_shapes[k]) {
                out.push_back({ViolationKind::ShapeRuleViolation, idx,
                               "operand " + id + " annotated " + op.operand_shapes[k].str() + " but defined as " +
                                   it->second->str()});
                operands_ok = false;
            }
        }
        if (operands_ok) {
            if (auto v = shape_rule_violation(op.opcode, op.operand_shapes, op.result_shape))
                out.push_back({ViolationKind::ShapeRuleViolation, idx, *v});
        }
        if (!is_result_name(op.result_id))
            out.push_back({ViolationKind::SsaViolation, idx, "result name `" + op.result_id + "` is not %<integer>"});
        if (!defined.emplace(op.result_id, &op.result_shape).second)
            out.push_back({ViolationKind::SsaViolation, idx, "redefinition of " + op.result_id});
    }

    for (const auto& r : f.returns)
        if (!defined.count(r)) out.push_back({ViolationKind::SsaViolation, -1, "return of undefined value " + r});
    return out;
}

void throw_if_invalid(const GraphFunction& f) {
    auto violations = validate(f);
    if (violations.empty()) return;
    const auto& v = violations.front();
    std::string msg = (v.op_index >= 0 ? "op " + std::to_string(v.op_index) + ": " : std::string()) + v.message;
    switch (v.kind) {
        case ViolationKind::Syntax: throw SyntaxError(msg);
        case ViolationKind::UnknownOpcode: throw UnknownOpcode(msg);
        case ViolationKind::ArityMismatch: throw ArityMismatch(msg);
        case ViolationKind::ShapeRuleViolation: throw ShapeRuleViolation(msg);
        case ViolationKind::SsaViolation: throw SsaViolation(msg);
    }
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    GraphFunction parse() {
        GraphFunction f;
        expect_keyword("func");
        expect('@');
        f.name = identifier("function name");
        expect('(');
        skip_ws();
        if (peek() != ')') {
            while (true) {
                Argument a;
                a.id = value_name("argument name");
                if (!is_arg_name(a.id)) fail("argument name of the form %arg<k>");
                expect(':');
                a.shape = tensor_type();
                f.args.push_back(std::move(a));
                skip_ws();
                if (peek() == ',') {
                    advance();
                    continue;
                }
                break;
            }
        }
        expect(')');
        expect("->");
        std::vector<TensorShape> declared_returns = type_list();
        expect('{');
        while (true) {
            skip_ws();
            if (peek() == '%') {
                f.body.push_back(operation());
            } else if (at_keyword("return")) {
                expect_keyword("return");
                skip_ws();
                if (peek() == '%') {
                    f.returns.push_back(value_name("returned value"));
                    skip_ws();
                    while (peek() == ',') {
                        advance();
                        f.returns.push_back(value_name("returned value"));
                        skip_ws();
                    }
                }
                break;
            } else {
                fail("operation `%N = xpu.<op> ...` or `return`");
            }
        }
        expect('}');
        skip_ws();
        if (pos_ < text_.size()) fail("end of input");
        if (f.body.empty()) throw SyntaxError(where() + ": function body is empty");

        throw_if_invalid(f);
        auto actual = f.return_shapes();
        if (actual != declared_returns)
            throw ShapeRuleViolation("signature declares " + std::to_string(declared_returns.size()) +
                                     " result type(s) that do not match the returned values");
        return f;
    }

private:
    OperationNode operation() {
        OperationNode op;
        skip_ws();
        const std::string at = where();
        op.result_id = value_name("result name");
        if (!is_result_name(op.result_id)) fail_at(at, "result name of the form %<integer>");
        expect('=');
        skip_ws();
        const std::string op_at = where();
        std::string name = identifier("opcode");
        auto code = name.rfind("xpu.", 0) == 0 ? opcode_from_name(name) : std::nullopt;
        if (!code) throw UnknownOpcode(op_at + ": unknown opcode `" + name + "`");
        op.opcode = *code;
        skip_ws();
        if (peek() == '%') {
            op.operand_ids.push_back(value_name("operand"));
            skip_ws();
            while (peek() == ',') {
                advance();
                op.operand_ids.push_back(value_name("operand"));
                skip_ws();
            }
        }
        if (op.operand_ids.size() != arity(op.opcode))
            throw ArityMismatch(op_at + ": " + name + " takes " + std::to_string(arity(op.opcode)) +
                                " operands, got " + std::to_string(op.operand_ids.size()));
        expect(':');
        const std::string types_at = (skip_ws(), where());
        op.operand_shapes = type_list();
        if (op.operand_shapes.size() != op.operand_ids.size())
            fail_at(types_at, std::to_string(op.operand_ids.size()) + " operand type(s)");
        expect("->");
        op.result_shape = tensor_type();
        return op;
    }

    // `(T, T, ...)` or a single bare `T`.
    std::vector<TensorShape> type_list() {
        std::vector<TensorShape> out;
        skip_ws();
        if (peek() != '(') {
            out.push_back(tensor_type());
            return out;
        }
        advance();
        skip_ws();
        if (peek() == ')') {
            advance();
            return out;
        }
        while (true) {
            out.push_back(tensor_type());
            skip_ws();
            if (peek() == ',') {
                advance();
                continue;
            }
            break;
        }
        expect(')');
        return out;
    }

    TensorShape tensor_type() {
        skip_ws();
        const std::string at = where();
        const std::size_t start = pos_;
        if (text_.substr(pos_, 7) != "tensor<") fail("tensor type `tensor<...>`");
        while (pos_ < text_.size() && text_[pos_] != '>' && text_[pos_] != '\n') advance();
        if (peek() != '>') fail_at(at, "`>` closing the tensor type");
        advance();
        auto shape = TensorShape::parse(text_.substr(start, pos_ - start));
        if (!shape) fail_at(at, "tensor type `tensor<DxDx...xDTYPE>` with positive dims and a known element type");
        return *shape;
    }

    std::string value_name(const char* what) {
        skip_ws();
        if (peek() != '%') fail(std::string(what) + " starting with `%`");
        const std::size_t start = pos_;
        advance();
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            advance();
        if (pos_ - start < 2) fail_at(where(), what);
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string identifier(const char* what) {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '.'))
            advance();
        if (pos_ == start) fail(what);
        return std::string(text_.substr(start, pos_ - start));
    }

    bool at_keyword(std::string_view kw) {
        skip_ws();
        if (text_.substr(pos_, kw.size()) != kw) return false;
        const std::size_t end = pos_ + kw.size();
        return end >= text_.size() || !(std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_');
    }

    void expect_keyword(std::string_view kw) {
        if (!at_keyword(kw)) fail("`" + std::string(kw) + "`");
        for (std::size_t i = 0; i < kw.size(); ++i) advance();
    }

    void expect(char c) {
        skip_ws();
        if (peek() != c) fail(std::string("`") + c + "`");
        advance();
    }

    void expect(std::string_view s) {
        skip_ws();
        if (text_.substr(pos_, s.size()) != s) fail("`" + std::string(s) + "`");
        for (std::size_t i = 0; i < s.size(); ++i) advance();
    }

    void skip_ws() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
            } else {
                break;
            }
        }
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    std::string where() const { return std::to_string(line_) + ":" + std::to_string(col_); }

    [[noreturn]] void fail(const std::string& expected) { fail_at(where(), expected); }

    [[noreturn]] void fail_at(const std::string& at, const std::string& expected) {
        std::string found = pos_ < text_.size() ? "`" + std::string(1, text_[pos_]) + "`" : "end of input";
        throw SyntaxError(at + ": expected " + expected + ", found " + found);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

std::string type_list_text(const std::vector<TensorShape>& shapes) {
    std::string out = "(";
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (i) out += ", ";
        out += shapes[i].str();
    }
    return out + ")";
}

std::string join_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ", ";
        out += ids[i];
    }
    return out;
}

}  // namespace

GraphFunction parse_function(std::string_view text) { return Parser(text).parse(); }

GraphFunction canonicalize(const GraphFunction& f) {
    std::unordered_map<std::string, std::string> rename;
    GraphFunction out = f;
    for (std::size_t i = 0; i < out.args.size(); ++i) {
        rename[f.args[i].id] = "%arg" + std::to_string(i);
        out.args[i].id = rename[f.args[i].id];
    }
    auto mapped = [&](const std::string& id) {
        auto it = rename.find(id);
        return it == rename.end() ? id : it->second;
    };
    for (std::size_t i = 0; i < out.body.size(); ++i) {
        auto& op = out.body[i];
        for (auto& id : op.operand_ids) id = mapped(id);
        rename[f.body[i].result_id] = "%" + std::to_string(i);
        op.result_id = rename[f.body[i].result_id];
    }
    for (auto& r : out.returns) r = mapped(r);
    return out;
}

std::string emit_text_verbatim(const GraphFunction& f) {
    if (auto v = validate(f); !v.empty())
        throw InvalidFunction("cannot emit invalid function: " + v.front().message);
    std::string out = "func @" + f.name + "(";
    for (std::size_t i = 0; i < f.args.size(); ++i) {
        if (i) out += ", ";
        out += f.args[i].id + ": " + f.args[i].shape.str();
    }
    out += ") -> " + type_list_text(f.return_shapes()) + " {\n";
    for (const auto& op : f.body) {
        out += "  " + op.result_id + " = " + qualified_name(op.opcode) + " " + join_ids(op.operand_ids) + " : " +
               type_list_text(op.operand_shapes) + " -> " + op.result_shape.str() + "\n";
    }
    out += "  return";
    if (!f.returns.empty()) out += " " + join_ids(f.returns);
    out += "\n}\n";
    return out;
}

std::string emit_text(const GraphFunction& f) {
    if (auto v = validate(f); !v.empty())
        throw InvalidFunction("cannot emit invalid function: " + v.front().message);
    return emit_text_verbatim(canonicalize(f));
}

std::string shape_summary(const GraphFunction& f) {
    std::string out;
    for (std::size_t i = 0; i < f.args.size(); ++i) {
        if (i) out += ',';
        out += f.args[i].shape.str();
    }
    out += "->";
    auto rs = f.return_shapes();
    for (std::size_t i = 0; i < rs.size(); ++i) {
        if (i) out += ',';
        out += rs[i].str();
    }
    return out;
}

std::vector<std::vector<int>> operand_def_indices(const GraphFunction& f) {
    std::unordered_map<std::string_view, int> def;
    for (const auto& a : f.args) def[a.id] = -1;
    std::vector<std::vector<int>> out(f.body.size());
    for (std::size_t i = 0; i < f.body.size(); ++i) {
        for (const auto& id : f.body[i].operand_ids) {
            auto it = def.find(id);
            out[i].push_back(it == def.end() ? -1 : it->second);
        }
        def[f.body[i].result_id] = static_cast<int>(i);
    }
    return out;
}

}  // namespace hwcost::ir
