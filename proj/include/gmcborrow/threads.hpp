#pragma once

#include <functional>

namespace gmc {

// Worker count: GMC_THREADS environment override (>= 1), else hardware concurrency.
int worker_count();

// Runs body(0..n-1) across workers. Each index writes only its own outputs, so
// results are independent of scheduling; the first exception (by index) is rethrown.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace gmc
