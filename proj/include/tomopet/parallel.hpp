#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <vector>

namespace tomopet {

/// Sets the OpenMP worker count used by every parallel kernel (n >= 1).
void set_num_threads(int n);
int num_threads();

/// Fixed-size blocks used by order-preserving reductions. Results of the
/// parallel kernels depend on this constant, never on the worker count.
inline constexpr std::size_t kReductionBlock = 4096;

/// Sum of term(i) for i in [0, n): blocks of kReductionBlock are summed in
/// parallel, then the block sums are added in index order.
template <class Term>
double blocked_sum(std::size_t n, Term&& term) {
    const std::size_t n_blocks = (n + kReductionBlock - 1) / kReductionBlock;
    std::vector<double> partial(n_blocks, 0.0);
    const auto nb = static_cast<std::ptrdiff_t>(n_blocks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < nb; ++b) {
        const std::size_t lo = std::size_t(b) * kReductionBlock;
        const std::size_t hi = std::min(n, lo + kReductionBlock);
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += term(i);
        partial[std::size_t(b)] = s;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

/// Collects the first exception thrown inside an OpenMP region so it can be
/// rethrown on the calling thread.
class ExceptionSlot {
public:
    template <class F>
    void run(F&& f) noexcept {
        try {
            f();
        } catch (...) {
            capture();
        }
    }
    void rethrow_if_set();

private:
    void capture() noexcept;
    std::exception_ptr error_;
    bool set_ = false;
};

} // namespace tomopet
