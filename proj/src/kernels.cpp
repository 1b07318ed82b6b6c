#include "sparseprior/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sparseprior::kern {

namespace {

// Idle workers must sleep between regions: the serial stretches of a training
// step are long, and a spinning sibling steals cycles from them. Runs before
// libgomp reads its environment; an explicit user setting wins.
[[maybe_unused]] const bool wait_policy_default = [] {
#ifdef _OPENMP
    ::setenv("OMP_WAIT_POLICY", "passive", /*overwrite=*/0);
#endif
    return true;
}();

}  // namespace

int active_threads() {
    static const int cached = [] {
        int n = 1;
#ifdef _OPENMP
        n = omp_get_max_threads();
#endif
        if (const char* env = std::getenv("SPARSEPRIOR_THREADS")) {
            const int cap = std::atoi(env);
            if (cap >= 1 && cap < n) n = cap;
        }
        return n < 1 ? 1 : n;
    }();
    return cached;
}

void gemm_serial(bool ta, bool tb, long m, long n, long k, const double* a, const double* b,
                 double* c) {
    if (ta && tb) throw std::invalid_argument("gemm: both operands transposed is unsupported");
    for (long i = 0; i < m; ++i) {
        double* crow = c + i * n;
        std::fill(crow, crow + n, 0.0);
        if (!ta && !tb) {
            // C[i,:] += A[i,p] * B[p,:]
            for (long p = 0; p < k; ++p) {
                const double aip = a[i * k + p];
                const double* brow = b + p * n;
                for (long j = 0; j < n; ++j) crow[j] += aip * brow[j];
            }
        } else if (!ta && tb) {
            // C[i,j] = dot(A[i,:], B[j,:])
            const double* arow = a + i * k;
            for (long j = 0; j < n; ++j) {
                const double* brow = b + j * k;
                double acc = 0.0;
                for (long p = 0; p < k; ++p) acc += arow[p] * brow[p];
                crow[j] = acc;
            }
        } else {
            // C[i,:] += A[p,i] * B[p,:]
            for (long p = 0; p < k; ++p) {
                const double api = a[p * m + i];
                const double* brow = b + p * n;
                for (long j = 0; j < n; ++j) crow[j] += api * brow[j];
            }
        }
    }
}

void gemm(bool ta, bool tb, long m, long n, long k, const double* a, const double* b, double* c) {
    if (ta && tb) throw std::invalid_argument("gemm: both operands transposed is unsupported");
    const bool par = static_cast<std::size_t>(m) * n * k >= gemm_grain && m > 1;
    // Each output row is produced by one thread with a fixed-order inner loop,
    // so the result does not depend on the thread count.
#pragma omp parallel for schedule(static) num_threads(active_threads()) if (par)
    for (long i = 0; i < m; ++i) {
        double* crow = c + i * n;
        std::fill(crow, crow + n, 0.0);
        if (!ta && !tb) {
            for (long p = 0; p < k; ++p) {
                const double aip = a[i * k + p];
                const double* brow = b + p * n;
                for (long j = 0; j < n; ++j) crow[j] += aip * brow[j];
            }
        } else if (!ta && tb) {
            const double* arow = a + i * k;
            for (long j = 0; j < n; ++j) {
                const double* brow = b + j * k;
                double acc = 0.0;
                for (long p = 0; p < k; ++p) acc += arow[p] * brow[p];
                crow[j] = acc;
            }
        } else {
            for (long p = 0; p < k; ++p) {
                const double api = a[p * m + i];
                const double* brow = b + p * n;
                for (long j = 0; j < n; ++j) crow[j] += api * brow[j];
            }
        }
    }
}

double sum_serial(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double sum_blocked(const double* x, std::size_t n) {
    constexpr std::size_t block = 4096;
    const std::size_t nblocks = (n + block - 1) / block;
    if (nblocks <= 1) return sum_serial(x, n);
    std::vector<double> partial(nblocks);
#pragma omp parallel for schedule(static) num_threads(active_threads()) if (n >= parallel_grain)
    for (long long bi = 0; bi < static_cast<long long>(nblocks); ++bi) {
        const std::size_t lo = static_cast<std::size_t>(bi) * block;
        const std::size_t hi = std::min(lo + block, n);
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += x[i];
        partial[bi] = acc;
    }
    return sum_serial(partial.data(), nblocks);
}

void row_sum(long m, long n, const double* x, double* out) {
#pragma omp parallel for schedule(static) num_threads(active_threads()) \
    if (static_cast<std::size_t>(m) * n >= parallel_grain)
    for (long i = 0; i < m; ++i) {
        const double* row = x + i * n;
        double acc = 0.0;
        for (long j = 0; j < n; ++j) acc += row[j];
        out[i] = acc;
    }
}

void col_sum(long m, long n, const double* x, double* out) {
#pragma omp parallel for schedule(static) num_threads(active_threads()) \
    if (static_cast<std::size_t>(m) * n >= parallel_grain)
    for (long j = 0; j < n; ++j) {
        double acc = 0.0;
        for (long i = 0; i < m; ++i) acc += x[i * n + j];
        out[j] = acc;
    }
}

static inline void softmax_row(long n, const double* row, double* out) {
    double mx = row[0];
    for (long j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (long j = 0; j < n; ++j) {
        out[j] = std::exp(row[j] - mx);
        denom += out[j];
    }
    const double inv = 1.0 / denom;
    for (long j = 0; j < n; ++j) out[j] *= inv;
}

void softmax_rows_serial(long m, long n, const double* x, double* out) {
    for (long i = 0; i < m; ++i) softmax_row(n, x + i * n, out + i * n);
}

void softmax_rows(long m, long n, const double* x, double* out) {
#pragma omp parallel for schedule(static) num_threads(active_threads()) \
    if (static_cast<std::size_t>(m) * n >= parallel_grain)
    for (long i = 0; i < m; ++i) softmax_row(n, x + i * n, out + i * n);
}

void l2norm_rows(long m, long n, const double* x, double* out) {
#pragma omp parallel for schedule(static) num_threads(active_threads()) \
    if (static_cast<std::size_t>(m) * n >= parallel_grain)
    for (long i = 0; i < m; ++i) {
        const double* row = x + i * n;
        double acc = 0.0;
        for (long j = 0; j < n; ++j) acc += row[j] * row[j];
        out[i] = std::sqrt(acc);
    }
}

}  // namespace sparseprior::kern
