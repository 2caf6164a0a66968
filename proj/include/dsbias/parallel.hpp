// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace dsbias {

/// Runs fn(0..n-1) on up to `jobs` threads. Work items must be independent;
/// the first exception thrown by any item is rethrown after all threads join.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace dsbias
