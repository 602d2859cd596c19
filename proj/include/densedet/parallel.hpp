#pragma once

namespace densedet {

// Worker count for the OpenMP kernels: the DENSEDET_THREADS environment
// variable when set to a positive value, otherwise the OpenMP default.
int thread_count();

// Overrides the environment for the rest of the process; 0 restores "auto".
void set_thread_count(int threads);

}  // namespace densedet
