#include "tomopet/parallel.hpp"

#include <omp.h>

#include "tomopet/error.hpp"

namespace tomopet {

void set_num_threads(int n) {
    if (n < 1) throw ValidationError("thread count must be >= 1");
    omp_set_num_threads(n);
}

int num_threads() { return omp_get_max_threads(); }

void ExceptionSlot::capture() noexcept {
#pragma omp critical(tomopet_exception_slot)
    {
        if (!set_) {
            error_ = std::current_exception();
            set_ = true;
        }
    }
}

void ExceptionSlot::rethrow_if_set() {
    if (set_) std::rethrow_exception(error_);
}

} // namespace tomopet
