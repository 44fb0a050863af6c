#pragma once

#include <cstddef>
#include <functional>

namespace fusionbiopsy {

/// Worker cap from FUSIONBIOPSY_THREADS (unset or invalid: hardware concurrency).
std::size_t configured_threads();

/// Runs task(i) for i in [0, n) on up to `threads` workers. Tasks must write
/// only to their own slot; the first exception thrown is rethrown here.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& task);

}  // namespace fusionbiopsy
