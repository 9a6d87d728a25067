#pragma once

#include "stcorr/common.hpp"

#include <cstddef>
#include <exception>
#include <vector>

namespace stcorr::detail {

// Runs body(k) for k in [0, n). Exceptions cannot cross an OpenMP region, so
// they are captured per index and the one with the lowest index is rethrown;
// that keeps error reporting identical between serial and parallel runs.
template <class Body>
void parallel_for(std::ptrdiff_t n, Exec exec, Body&& body, int chunk = 1) {
    if (n <= 0) return;
    if (exec == Exec::serial) {
        for (std::ptrdiff_t k = 0; k < n; ++k) body(k);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    bool failed = false;
#pragma omp parallel for schedule(dynamic, chunk) reduction(|| : failed)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        try {
            body(k);
        } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
            failed = true;
        }
    }
    if (failed) {
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
}

}  // namespace stcorr::detail
