#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dswarm {

enum class ErrorCode {
    NonFinite,
    DimZero,
    DimMismatch,
    InvalidArgument,
    OutOfRange,
    EmptyInput,
    NeedTwoModels,
    NeedTwoSamples,
    LengthMismatch,
    EmptyRepository,
    MissingComponent,
    IndexOutOfRange,
    UtilityFailed,
    GenerationFailed,
    JudgeFailed,
    TakerFailed,
    MissingFeatures,
    MissingReference,
    EmptyGrid,
    EmptyWindow,
    TooFewPoints,
    ClusterTooSmall,
    Transport,
    BadResponse,
    Exhausted,
    Parse,
    Io,
    EmptyDataset,
    BadMagic,
    VersionUnsupported,
    TruncatedFile,
    ConfigMismatch,
    Locked,
    Audit,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Library-wide exception. `index` carries the offending element, record, line
/// or byte offset depending on the code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::optional<std::size_t> index = std::nullopt);

    ErrorCode code() const noexcept { return code_; }
    std::optional<std::size_t> index() const noexcept { return index_; }

private:
    ErrorCode code_;
    std::optional<std::size_t> index_;
};

}  // namespace dswarm
