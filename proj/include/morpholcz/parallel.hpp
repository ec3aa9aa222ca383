// Copyright 2026 The morpholcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace morpholcz {

/// Worker cap for parallel_for (the CLI's --jobs). 0 means hardware
/// concurrency.
void set_jobs(unsigned n);
unsigned jobs();

/// Calls fn(i) for i in [0, n) on up to jobs() threads. Iterations must be
/// independent; work is handed out in contiguous chunks, so results written
/// by index are deterministic. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace morpholcz
