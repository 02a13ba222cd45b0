// Times the OpenMP kernels against their serial reference twins, plus a
// full forward/backward step at the default toy shape.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mbtsad/common.hpp"
#include "mbtsad/kernels.hpp"
#include "mbtsad/model.hpp"

using namespace mbtsad;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void fill_random(std::vector<double>& v, Rng& rng) {
    for (auto& x : v) x = rng.uniform_sym(1.0);
}

void bench_matmul(int M, int K, int N, int reps) {
    Rng rng(42);
    std::vector<double> a(static_cast<size_t>(M) * K), b(static_cast<size_t>(K) * N),
        c(static_cast<size_t>(M) * N);
    fill_random(a, rng);
    fill_random(b, rng);
    const double serial =
        time_ms([&] { kernels::reference::matmul(a.data(), b.data(), c.data(), M, K, N); }, reps);
    const double par =
        time_ms([&] { kernels::matmul(a.data(), b.data(), c.data(), M, K, N); }, reps);
    std::printf("matmul %4dx%4dx%4d   serial %8.3f ms   omp %8.3f ms   speedup %.2fx\n", M, K, N,
                serial, par, serial / par);
}

void bench_softmax(int rows, int cols, int reps) {
    Rng rng(43);
    std::vector<double> x(static_cast<size_t>(rows) * cols);
    const double serial = time_ms(
        [&] {
            fill_random(x, rng);
            kernels::reference::softmax_rows_masked(x.data(), rows, cols, nullptr);
        },
        reps);
    const double par = time_ms(
        [&] {
            fill_random(x, rng);
            kernels::softmax_rows_masked(x.data(), rows, cols, nullptr);
        },
        reps);
    std::printf("softmax %5d rows x %4d   serial %8.3f ms   omp %8.3f ms   speedup %.2fx\n",
                rows, cols, serial, par, serial / par);
}

void bench_train_step(int threads) {
#ifdef _OPENMP
    omp_set_num_threads(threads);
#endif
    ModelConfig cfg;
    cfg.vocab_size = 4000;
    ModelParams p = init_params(cfg, 1);
    Rng rng(44);
    std::vector<std::vector<int>> ids(32, std::vector<int>(cfg.max_len));
    std::vector<int> labels(32);
    for (auto& row : ids) {
        row[0] = SubwordVocab::kCls;
        for (size_t t = 1; t < row.size(); ++t) row[t] = rng.uniform_int(4, cfg.vocab_size - 1);
    }
    for (auto& y : labels) y = rng.uniform_int(0, 1);

    const double ms = time_ms(
        [&] {
            BatchCache cache = forward_batch(p, ids, DropoutSpec{});
            LossInjections inj;
            cross_entropy(cache.logits, labels, &inj.d_logits);
            ModelParams grads = backward_batch(p, cache, inj);
            (void)grads;
        },
        5);
    std::printf("fwd+bwd step (batch 32, toy config), %d thread(s): %8.2f ms\n", threads, ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled; parallel kernels run serially\n");
#endif
#ifdef _OPENMP
    const int max_threads = omp_get_max_threads();
#else
    const int max_threads = 1;
#endif
    bench_matmul(256, 256, 256, 10);
    bench_matmul(1280, 64, 64, 20);
    bench_matmul(1280, 64, 128, 20);
    bench_softmax(4096, 64, 20);
    bench_train_step(1);
    if (max_threads > 1) bench_train_step(max_threads);
    return 0;
}
