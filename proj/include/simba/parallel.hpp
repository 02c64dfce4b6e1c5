#pragma once

namespace simba {

/// Caps the worker count used by all parallel regions. 0 restores the runtime default.
void set_thread_count(int n);
int thread_count();

/// Reads SIMBA_THREADS; returns 0 when unset or invalid.
int thread_count_from_env();

}  // namespace simba
