#pragma once

#include <stdexcept>
#include <string>

namespace ftpl {

// Every failure raised by the library derives from Error. The CLI maps the
// category() onto process exit codes.
enum class ErrorCategory { Validation, Numerical, Io };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define FTPL_DEFINE_ERROR(Name, Category)                                 \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& what) : Error(Category, what) {}     \
  };

FTPL_DEFINE_ERROR(ParameterError, ErrorCategory::Validation)
FTPL_DEFINE_ERROR(CoverageError, ErrorCategory::Validation)
FTPL_DEFINE_ERROR(CalibrationError, ErrorCategory::Validation)
FTPL_DEFINE_ERROR(ConfigError, ErrorCategory::Validation)
FTPL_DEFINE_ERROR(DataError, ErrorCategory::Validation)
FTPL_DEFINE_ERROR(ExtrapolationError, ErrorCategory::Validation)
FTPL_DEFINE_ERROR(NumericalError, ErrorCategory::Numerical)
FTPL_DEFINE_ERROR(FitError, ErrorCategory::Numerical)
FTPL_DEFINE_ERROR(FormatError, ErrorCategory::Io)
FTPL_DEFINE_ERROR(IoError, ErrorCategory::Io)

#undef FTPL_DEFINE_ERROR

// Raised when a fit cannot identify its parameters (flat data, zero amplitude,
// singular normal equations).
class DegenerateFitError : public FitError {
 public:
  explicit DegenerateFitError(const std::string& what) : FitError(what) {}
};

// Timestamp regression inside a time-tag stream; byte_offset points at the
// offending record.
class IntegrityError : public Error {
 public:
  IntegrityError(const std::string& what, std::size_t byte_offset)
      : Error(ErrorCategory::Io, what), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ParameterError(message);
}

}  // namespace ftpl
