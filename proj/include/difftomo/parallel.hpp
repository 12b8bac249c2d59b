#pragma once

#include <functional>

namespace difftomo {

/// Upper bound on worker threads used by parallel_for (default: 1).
void set_max_threads(int n);
int max_threads();

/// Runs body(i) for i in [0, n). Iterations must be independent; results
/// do not depend on the thread count.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace difftomo
