#include "hbab/parallel.hpp"

#include <cstdlib>
#include <string>

namespace hbab {

void configure_workers_from_env() {
#if defined(_OPENMP)
  if (const char* v = std::getenv("HBAB_NUM_THREADS")) {
    try {
      const int n = std::stoi(v);
      if (n > 0) omp_set_num_threads(n);
    } catch (...) {
    }
  }
#endif
}

}  // namespace hbab
