//
// Copyright 2026 KSE toolkit contributors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <functional>

namespace kse {

// Resolves a requested worker count: 0 means hardware concurrency, and the
// result is always >= 1.
int resolve_workers(int requested);

// Runs fn(i) for every i in [0, count). Work items must be independent; the
// caller is responsible for writing results into disjoint slots so the
// outcome does not depend on scheduling. The first exception thrown by a
// work item is rethrown on the calling thread.
void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace kse
