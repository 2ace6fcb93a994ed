#pragma once

#include <stdexcept>
#include <string>

namespace spadnn {

// Process exit status associated with each error family.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kNumeric = 3,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::kData)
      : std::runtime_error(what), code_(code) {}
  ExitCode exit_code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

#define SPADNN_DEFINE_ERROR(Name, Code)                                  \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(what, Code) {}        \
  };

SPADNN_DEFINE_ERROR(DimensionError, ExitCode::kData)
SPADNN_DEFINE_ERROR(DomainError, ExitCode::kData)
SPADNN_DEFINE_ERROR(IndexError, ExitCode::kData)
SPADNN_DEFINE_ERROR(ContractError, ExitCode::kUsage)
SPADNN_DEFINE_ERROR(ValidationError, ExitCode::kData)
SPADNN_DEFINE_ERROR(IntegrityError, ExitCode::kData)
SPADNN_DEFINE_ERROR(ParseError, ExitCode::kData)
SPADNN_DEFINE_ERROR(FormatError, ExitCode::kData)
SPADNN_DEFINE_ERROR(DataError, ExitCode::kData)
SPADNN_DEFINE_ERROR(ImportError, ExitCode::kData)
SPADNN_DEFINE_ERROR(IoError, ExitCode::kData)
SPADNN_DEFINE_ERROR(UsageError, ExitCode::kUsage)
SPADNN_DEFINE_ERROR(OptimizerError, ExitCode::kNumeric)
SPADNN_DEFINE_ERROR(TrainingError, ExitCode::kNumeric)

#undef SPADNN_DEFINE_ERROR

}  // namespace spadnn
