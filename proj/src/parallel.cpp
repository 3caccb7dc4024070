#include "margin/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace margin {

int worker_count() {
    int hardware = 1;
#ifdef _OPENMP
    hardware = omp_get_num_procs();
#endif
    if (const char* env = std::getenv("MARGIN_ENGINE_THREADS")) {
        int requested = 0;
        auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), requested);
        if (ec == std::errc{} && requested > 0) return requested;
    }
    return hardware > 0 ? hardware : 1;
}

}  // namespace margin
