#include "simba/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace simba {

namespace {
int g_default_threads = 0;
}

void set_thread_count(int n) {
  if (g_default_threads == 0) g_default_threads = omp_get_max_threads();
  omp_set_num_threads(n > 0 ? n : g_default_threads);
}

int thread_count() { return omp_get_max_threads(); }

int thread_count_from_env() {
  const char* value = std::getenv("SIMBA_THREADS");
  if (value == nullptr) return 0;
  try {
    const int n = std::stoi(value);
    return n > 0 ? n : 0;
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace simba
