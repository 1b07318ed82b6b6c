#pragma once

#include <cstddef>

// Dense numeric kernels. Each hot kernel has an OpenMP-parallel primary and a
// plain serial reference; tests compare the two. Parallel loops are
// partitioned over independent output elements (or fixed-size blocks for
// reductions), so results are bit-identical for any thread count.

namespace sparseprior::kern {

// Thread budget: min(omp max threads, SPARSEPRIOR_THREADS when set). Always >= 1.
int active_threads();

// Loops below this element count stay serial; forking costs more than it
// saves. Elementwise maps are memory-bound and need a much larger grain than
// the flop-bound gemm.
inline constexpr std::size_t parallel_grain = 1 << 18;
inline constexpr std::size_t gemm_grain = 1 << 18;  // m*n*k threshold

// C (m x n) = op(A) * op(B), row-major; op is transpose when the flag is set.
// ta && tb is not needed by any caller and is rejected.
void gemm(bool ta, bool tb, long m, long n, long k, const double* a, const double* b, double* c);
void gemm_serial(bool ta, bool tb, long m, long n, long k, const double* a, const double* b,
                 double* c);

// Deterministic blocked sum: fixed 4096-element blocks summed serially, block
// partials combined in index order. Identical result for 1..N threads.
double sum_blocked(const double* x, std::size_t n);
double sum_serial(const double* x, std::size_t n);

void row_sum(long m, long n, const double* x, double* out);     // out: m
void col_sum(long m, long n, const double* x, double* out);     // out: n
void softmax_rows(long m, long n, const double* x, double* out);
void softmax_rows_serial(long m, long n, const double* x, double* out);
void l2norm_rows(long m, long n, const double* x, double* out);  // out: m

template <class F>
void map_unary(std::size_t n, const double* x, double* y, F f) {
#pragma omp parallel for schedule(static) if (n >= parallel_grain)
    for (long long i = 0; i < static_cast<long long>(n); ++i) y[i] = f(x[i]);
}

template <class F>
void map_unary_serial(std::size_t n, const double* x, double* y, F f) {
    for (std::size_t i = 0; i < n; ++i) y[i] = f(x[i]);
}

template <class F>
void map_binary(std::size_t n, const double* a, const double* b, double* y, F f) {
#pragma omp parallel for schedule(static) if (n >= parallel_grain)
    for (long long i = 0; i < static_cast<long long>(n); ++i) y[i] = f(a[i], b[i]);
}

}  // namespace sparseprior::kern
