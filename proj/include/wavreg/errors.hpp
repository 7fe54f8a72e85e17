#pragma once

#include <stdexcept>
#include <string>

namespace wavreg {

// Error categories. The CLI maps each to a distinct exit code.
enum class ErrorCategory { dimension, input, usage, numeric, config, format, unsupported_base, resolution };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what) : std::runtime_error(what), category_(category) {}
    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

#define WAVREG_DEFINE_ERROR(Name, cat)                                                    \
    class Name : public Error {                                                           \
    public:                                                                               \
        explicit Name(const std::string& what) : Error(ErrorCategory::cat, what) {}       \
    }

WAVREG_DEFINE_ERROR(DimensionError, dimension);
WAVREG_DEFINE_ERROR(InputError, input);
WAVREG_DEFINE_ERROR(UsageError, usage);
WAVREG_DEFINE_ERROR(NumericError, numeric);
WAVREG_DEFINE_ERROR(ConfigError, config);
WAVREG_DEFINE_ERROR(UnsupportedBaseError, unsupported_base);
WAVREG_DEFINE_ERROR(ResolutionError, resolution);

#undef WAVREG_DEFINE_ERROR

// Format errors carry the byte offset at which parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(ErrorCategory::format, what + " (at offset " + std::to_string(offset) + ")"),
          detail_(what),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }
    // The message without the offset suffix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
    std::size_t offset_;
};

const char* category_name(ErrorCategory category);

}  // namespace wavreg
