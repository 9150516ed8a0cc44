#pragma once

#include <cstddef>

namespace caeloc::nn {

// Small row-major GEMM kernels used by the dense layer. Loops are
// arranged so the innermost dimension is contiguous and vectorizable;
// rows of A are tiled by 4 to reuse each streamed row of B.

// C[M x N] += A[M x K] * B[K x N]
template <class T>
void gemm_nn(int M, int K, int N, const T* A, const T* B, T* C) {
    int m = 0;
    for (; m + 4 <= M; m += 4) {
        const T* a0 = A + size_t(m) * K;
        const T* a1 = a0 + K;
        const T* a2 = a1 + K;
        const T* a3 = a2 + K;
        T* c0 = C + size_t(m) * N;
        T* c1 = c0 + N;
        T* c2 = c1 + N;
        T* c3 = c2 + N;
        for (int k = 0; k < K; ++k) {
            const T* b = B + size_t(k) * N;
            T v0 = a0[k], v1 = a1[k], v2 = a2[k], v3 = a3[k];
            for (int j = 0; j < N; ++j) {
                T bj = b[j];
                c0[j] += v0 * bj;
                c1[j] += v1 * bj;
                c2[j] += v2 * bj;
                c3[j] += v3 * bj;
            }
        }
    }
    for (; m < M; ++m) {
        const T* a = A + size_t(m) * K;
        T* c = C + size_t(m) * N;
        for (int k = 0; k < K; ++k) {
            const T* b = B + size_t(k) * N;
            T v = a[k];
            for (int j = 0; j < N; ++j) c[j] += v * b[j];
        }
    }
}

// C[M x N] += A^T * B where A is [K x M], B is [K x N]
template <class T>
void gemm_tn(int M, int K, int N, const T* A, const T* B, T* C) {
    for (int k = 0; k < K; ++k) {
        const T* a = A + size_t(k) * M;
        const T* b = B + size_t(k) * N;
        int m = 0;
        for (; m + 4 <= M; m += 4) {
            T v0 = a[m], v1 = a[m + 1], v2 = a[m + 2], v3 = a[m + 3];
            T* c0 = C + size_t(m) * N;
            T* c1 = c0 + N;
            T* c2 = c1 + N;
            T* c3 = c2 + N;
            for (int j = 0; j < N; ++j) {
                T bj = b[j];
                c0[j] += v0 * bj;
                c1[j] += v1 * bj;
                c2[j] += v2 * bj;
                c3[j] += v3 * bj;
            }
        }
        for (; m < M; ++m) {
            T v = a[m];
            T* c = C + size_t(m) * N;
            for (int j = 0; j < N; ++j) c[j] += v * b[j];
        }
    }
}

// C[M x N] += A * B^T where A is [M x K], B is [N x K]
template <class T>
void gemm_nt(int M, int K, int N, const T* A, const T* B, T* C) {
    for (int m = 0; m < M; ++m) {
        const T* a = A + size_t(m) * K;
        T* c = C + size_t(m) * N;
        for (int j = 0; j < N; ++j) {
            const T* b = B + size_t(j) * K;
            T acc = T(0);
            for (int k = 0; k < K; ++k) acc += a[k] * b[k];
            c[j] += acc;
        }
    }
}

// acc[N] (int32) += x[K] (int16) dot w[K] (int16), the int8 inference
// workhorse: contiguous int16 dot products reduce to widening-multiply
// SIMD under -O3.
inline int32_t dot_i16(int K, const int16_t* a, const int16_t* b) {
    int32_t acc = 0;
    for (int k = 0; k < K; ++k) acc += int32_t(a[k]) * int32_t(b[k]);
    return acc;
}

} // namespace caeloc::nn
