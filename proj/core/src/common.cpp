#include "facefit/common.hpp"

#include <algorithm>
#include <cstdlib>

namespace facefit {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedHeader: return "MalformedHeader";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NonFiniteData: return "NonFiniteData";
        case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
        case ErrorKind::NearZeroDepth: return "NearZeroDepth";
        case ErrorKind::EmptyMask: return "EmptyMask";
        case ErrorKind::NoCorrespondences: return "NoCorrespondences";
        case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorKind::DegenerateLandmarks: return "DegenerateLandmarks";
        case ErrorKind::EmptyAfterMasking: return "EmptyAfterMasking";
        case ErrorKind::IoFailure: return "IoFailure";
    }
    return "UnknownError";
}

int resolve_thread_count(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("FACEFIT_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn, int threads) {
    const std::int64_t count = end - begin;
    if (count <= 0) return;
    int workers = std::min<std::int64_t>(resolve_thread_count(threads), count);
    if (workers <= 1) {
        fn(begin, end);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::int64_t chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::int64_t lo = begin + w * chunk;
        const std::int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

} // namespace facefit
