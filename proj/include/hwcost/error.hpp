#pragma once

#include <stdexcept>
#include <string>

namespace hwcost {

/// Broad classification used by the command-line front end to pick an exit code.
enum class ErrorCategory { Usage, Data, Internal };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}
    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

#define HWCOST_DATA_ERROR(Name)                                                \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(ErrorCategory::Data, what) {} \
    }

// IR
HWCOST_DATA_ERROR(SyntaxError);
HWCOST_DATA_ERROR(UnknownOpcode);
HWCOST_DATA_ERROR(ArityMismatch);
HWCOST_DATA_ERROR(ShapeRuleViolation);
HWCOST_DATA_ERROR(SsaViolation);
HWCOST_DATA_ERROR(InvalidFunction);
// tokenizer / dataset
HWCOST_DATA_ERROR(EmptyCorpus);
HWCOST_DATA_ERROR(VocabFormatError);
HWCOST_DATA_ERROR(IoError);
HWCOST_DATA_ERROR(CsvFormatError);
HWCOST_DATA_ERROR(ValidationError);
// nn / models / training
HWCOST_DATA_ERROR(IdOutOfRange);
HWCOST_DATA_ERROR(SequenceTooShort);
HWCOST_DATA_ERROR(ShapeMismatch);
HWCOST_DATA_ERROR(ModeMismatch);
HWCOST_DATA_ERROR(LengthMismatch);
HWCOST_DATA_ERROR(MixedTargets);
HWCOST_DATA_ERROR(EmptyDataset);
HWCOST_DATA_ERROR(CheckpointError);

#undef HWCOST_DATA_ERROR

/// Invalid configuration values (generator, split ratios, model or training config).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::Usage, what) {}
};

}  // namespace hwcost
