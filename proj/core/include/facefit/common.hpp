#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace facefit {

enum class ErrorKind {
    MalformedHeader,
    DimensionMismatch,
    NonFiniteData,
    DegenerateGeometry,
    NearZeroDepth,
    EmptyMask,
    NoCorrespondences,
    IndexOutOfRange,
    DegenerateLandmarks,
    EmptyAfterMasking,
    IoFailure,
};

const char* to_string(ErrorKind kind);

/// Library-wide exception; `kind` classifies the failure, the message names
/// the offending field or file position.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

/// Resolves the effective worker count: explicit request > FACEFIT_THREADS
/// env var > hardware concurrency.
int resolve_thread_count(int requested = 0);

/// Runs fn(begin..end) split into contiguous index ranges, one per worker.
/// The partition depends only on (end - begin) and `threads`, and each index
/// is processed by exactly one worker, so results are deterministic whenever
/// fn writes only to its own index.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn,
                  int threads = 0);

} // namespace facefit
