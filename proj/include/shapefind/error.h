#pragma once

#include <stdexcept>
#include <string>

namespace shapefind {

/// Broad failure classes. The CLI maps these onto exit codes and the
/// service maps them onto ApiError codes.
enum class ErrorKind {
    Parse,          // malformed input bytes or documents
    Degenerate,     // geometry that cannot produce the requested feature
    InvalidArgument,
    NotFound,
    Incompatible,   // on-disk format version mismatch
    Io,
    Provider,       // label provider failures
    Config,
    Timeout,        // a query ran past its deadline
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace shapefind
