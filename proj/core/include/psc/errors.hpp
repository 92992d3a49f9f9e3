#pragma once

#include <stdexcept>
#include <string>

namespace psc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Size/shape preconditions: mismatched lengths, n out of range.
struct DimensionError : Error {
    using Error::Error;
};

/// Invalid values: non-bijective rankings, bad parameters, bad configuration.
struct ValidationError : Error {
    using Error::Error;
};

/// Malformed input data; carries a 1-based line number when known.
struct ParseError : Error {
    explicit ParseError(const std::string& what, std::size_t line_no = 0)
        : Error(line_no ? what + " (line " + std::to_string(line_no) + ")" : what),
          line(line_no) {}
    std::size_t line;
};

/// Ranker output from which no identifier could be extracted.
struct UnparseableOutputError : Error {
    using Error::Error;
};

/// Remote endpoint rejected the credential. Never retried.
struct AuthError : Error {
    using Error::Error;
};

/// Non-retryable HTTP status from the remote endpoint.
struct HttpError : Error {
    HttpError(const std::string& what, int status_code)
        : Error(what + " (HTTP " + std::to_string(status_code) + ")"), status(status_code) {}
    int status;
};

/// Transport-level failure that persisted past the retry budget.
struct TransportError : Error {
    using Error::Error;
};

/// A whole pipeline invocation failed (e.g. every sample unparseable).
struct PipelineError : Error {
    using Error::Error;
};

} // namespace psc
