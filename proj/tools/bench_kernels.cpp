// Timing comparison of the OpenMP kernels against their serial references.

#include <chrono>
#include <cstdio>
#include <vector>

#include "sparseprior/kernels.hpp"
#include "sparseprior/rng.hpp"

using namespace sparseprior;
using Clock = std::chrono::steady_clock;

namespace {

template <class F>
double time_ms(F f, int reps) {
    f();  // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) f();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
    std::printf("threads: %d\n", kern::active_threads());
    std::printf("%-24s %10s %10s %8s\n", "kernel", "serial ms", "omp ms", "speedup");

    Rng rng(1);
    const long m = 256, n = 256, k = 256;
    std::vector<double> a(m * k), b(k * n), c(m * n);
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);

    const double g_ser =
        time_ms([&] { kern::gemm_serial(false, false, m, n, k, a.data(), b.data(), c.data()); }, 5);
    const double g_par =
        time_ms([&] { kern::gemm(false, false, m, n, k, a.data(), b.data(), c.data()); }, 5);
    std::printf("%-24s %10.3f %10.3f %7.2fx\n", "gemm 256^3", g_ser, g_par, g_ser / g_par);

    std::vector<double> big(1 << 22);
    for (auto& v : big) v = rng.uniform(-1, 1);
    const double s_ser = time_ms([&] { (void)kern::sum_serial(big.data(), big.size()); }, 20);
    const double s_par = time_ms([&] { (void)kern::sum_blocked(big.data(), big.size()); }, 20);
    std::printf("%-24s %10.3f %10.3f %7.2fx\n", "sum 4M", s_ser, s_par, s_ser / s_par);

    const long rows = 4096, cols = 512;
    std::vector<double> x(rows * cols), y(rows * cols);
    for (auto& v : x) v = rng.uniform(-5, 5);
    const double sm_ser =
        time_ms([&] { kern::softmax_rows_serial(rows, cols, x.data(), y.data()); }, 10);
    const double sm_par = time_ms([&] { kern::softmax_rows(rows, cols, x.data(), y.data()); }, 10);
    std::printf("%-24s %10.3f %10.3f %7.2fx\n", "softmax 4096x512", sm_ser, sm_par,
                sm_ser / sm_par);
    return 0;
}
