#include "mbtsad/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace mbtsad::kernels {

namespace {

inline void matmul_row(const double* a, const double* b, double* c, int K, int N) {
    std::memset(c, 0, sizeof(double) * static_cast<size_t>(N));
    for (int k = 0; k < K; ++k) {
        const double aik = a[k];
        const double* brow = b + static_cast<size_t>(k) * N;
        for (int j = 0; j < N; ++j) c[j] += aik * brow[j];
    }
}

inline void softmax_row(double* x, int cols, const uint8_t* colmask) {
    double mx = -1e300;
    for (int j = 0; j < cols; ++j)
        if (!colmask || colmask[j]) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) {
        if (!colmask || colmask[j]) {
            x[j] = std::exp(x[j] - mx);
            sum += x[j];
        } else {
            x[j] = 0.0;
        }
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < cols; ++j) x[j] *= inv;
}

}  // namespace

void matmul(const double* a, const double* b, double* c, int M, int K, int N) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i)
        matmul_row(a + static_cast<size_t>(i) * K, b, c + static_cast<size_t>(i) * N, K, N);
}

void matmul_nt(const double* a, const double* b, double* c, int M, int K, int N) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
        const double* arow = a + static_cast<size_t>(i) * K;
        double* crow = c + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const double* brow = b + static_cast<size_t>(j) * K;
            double s = 0.0;
            for (int k = 0; k < K; ++k) s += arow[k] * brow[k];
            crow[j] = s;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c, int M, int K, int N) {
    // Blocked over output rows so b streams once per block instead of once
    // per row; accumulation order over k stays fixed per element.
    constexpr int kBlock = 16;
#pragma omp parallel for schedule(static)
    for (int i0 = 0; i0 < M; i0 += kBlock) {
        const int i1 = std::min(M, i0 + kBlock);
        for (int i = i0; i < i1; ++i)
            std::memset(c + static_cast<size_t>(i) * N, 0, sizeof(double) * static_cast<size_t>(N));
        for (int k = 0; k < K; ++k) {
            const double* arow = a + static_cast<size_t>(k) * M;
            const double* brow = b + static_cast<size_t>(k) * N;
            for (int i = i0; i < i1; ++i) {
                const double aki = arow[i];
                double* crow = c + static_cast<size_t>(i) * N;
                for (int j = 0; j < N; ++j) crow[j] += aki * brow[j];
            }
        }
    }
}

void add_bias_rows(double* x, const double* bias, int rows, int cols) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        double* xr = x + static_cast<size_t>(r) * cols;
        for (int j = 0; j < cols; ++j) xr[j] += bias[j];
    }
}

void col_sums(const double* x, int rows, int cols, double* out) {
    constexpr int kBlock = 32;
#pragma omp parallel for schedule(static)
    for (int j0 = 0; j0 < cols; j0 += kBlock) {
        const int j1 = std::min(cols, j0 + kBlock);
        for (int j = j0; j < j1; ++j) out[j] = 0.0;
        for (int r = 0; r < rows; ++r) {
            const double* xr = x + static_cast<size_t>(r) * cols;
            for (int j = j0; j < j1; ++j) out[j] += xr[j];
        }
    }
}

void softmax_rows_masked(double* x, int rows, int cols, const uint8_t* colmask) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) softmax_row(x + static_cast<size_t>(r) * cols, cols, colmask);
}

namespace reference {

void matmul(const double* a, const double* b, double* c, int M, int K, int N) {
    for (int i = 0; i < M; ++i)
        matmul_row(a + static_cast<size_t>(i) * K, b, c + static_cast<size_t>(i) * N, K, N);
}

void matmul_nt(const double* a, const double* b, double* c, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const double* arow = a + static_cast<size_t>(i) * K;
        double* crow = c + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const double* brow = b + static_cast<size_t>(j) * K;
            double s = 0.0;
            for (int k = 0; k < K; ++k) s += arow[k] * brow[k];
            crow[j] = s;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        double* crow = c + static_cast<size_t>(i) * N;
        std::memset(crow, 0, sizeof(double) * static_cast<size_t>(N));
        for (int k = 0; k < K; ++k) {
            const double aki = a[static_cast<size_t>(k) * M + i];
            const double* brow = b + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) crow[j] += aki * brow[j];
        }
    }
}

void add_bias_rows(double* x, const double* bias, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        double* xr = x + static_cast<size_t>(r) * cols;
        for (int j = 0; j < cols; ++j) xr[j] += bias[j];
    }
}

void col_sums(const double* x, int rows, int cols, double* out) {
    for (int j = 0; j < cols; ++j) {
        double s = 0.0;
        for (int r = 0; r < rows; ++r) s += x[static_cast<size_t>(r) * cols + j];
        out[j] = s;
    }
}

void softmax_rows_masked(double* x, int rows, int cols, const uint8_t* colmask) {
    for (int r = 0; r < rows; ++r) softmax_row(x + static_cast<size_t>(r) * cols, cols, colmask);
}

}  // namespace reference

}  // namespace mbtsad::kernels
