#pragma once

#include <cstdint>

// Dense kernels used by the model's forward and backward passes. Each kernel
// has an OpenMP-parallel implementation (this namespace) and a serial twin in
// kernels::reference. Parallelism is over output rows/columns only: every
// output element is accumulated by exactly one thread in a fixed order, so
// results are bit-identical to the serial reference regardless of thread
// count.

namespace mbtsad::kernels {

// c[M x N] = a[M x K] * b[K x N]
void matmul(const double* a, const double* b, double* c, int M, int K, int N);

// c[M x N] = a[M x K] * b^T, with b stored as [N x K]
void matmul_nt(const double* a, const double* b, double* c, int M, int K, int N);

// c[M x N] = a^T * b, with a stored as [K x M], b as [K x N]
void matmul_tn(const double* a, const double* b, double* c, int M, int K, int N);

// x[r][j] += bias[j]
void add_bias_rows(double* x, const double* bias, int rows, int cols);

// out[j] = sum_r x[r][j]
void col_sums(const double* x, int rows, int cols, double* out);

// In-place masked row softmax: entries with colmask[j] == 0 get weight 0,
// remaining entries of each row sum to 1. colmask may be null (no masking).
void softmax_rows_masked(double* x, int rows, int cols, const uint8_t* colmask);

namespace reference {
void matmul(const double* a, const double* b, double* c, int M, int K, int N);
void matmul_nt(const double* a, const double* b, double* c, int M, int K, int N);
void matmul_tn(const double* a, const double* b, double* c, int M, int K, int N);
void add_bias_rows(double* x, const double* bias, int rows, int cols);
void col_sums(const double* x, int rows, int cols, double* out);
void softmax_rows_masked(double* x, int rows, int cols, const uint8_t* colmask);
}  // namespace reference

}  // namespace mbtsad::kernels
