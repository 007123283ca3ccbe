#pragma once

// Row-independent dense kernels shared by the autodiff graph and the
// incremental (cached) decoder. Every output row is produced by the same
// sequence of floating-point operations regardless of how many rows are
// processed together, which is what makes cached decoding bitwise equal to
// the full forward pass.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace endo::kernels {

// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void matmul_acc(const T* __restrict a, const T* __restrict b, T* __restrict c, std::size_t m, std::size_t k,
                std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        T* c0 = c + (i + 0) * n;
        T* c1 = c + (i + 1) * n;
        T* c2 = c + (i + 2) * n;
        T* c3 = c + (i + 3) * n;
        const T* a0 = a + (i + 0) * k;
        const T* a1 = a + (i + 1) * k;
        const T* a2 = a + (i + 2) * k;
        const T* a3 = a + (i + 3) * k;
        for (std::size_t p = 0; p < k; ++p) {
            const T* br = b + p * n;
            const T v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
            for (std::size_t j = 0; j < n; ++j) {
                const T bj = br[j];
                c0[j] += v0 * bj;
                c1[j] += v1 * bj;
                c2[j] += v2 * bj;
                c3[j] += v3 * bj;
            }
        }
    }
    for (; i < m; ++i) {
        T* ci = c + i * n;
        const T* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const T* br = b + p * n;
            const T v = ai[p];
            for (std::size_t j = 0; j < n; ++j) ci[j] += v * br[j];
        }
    }
}

// C[K,N] += A[M,K]^T * B[M,N]
template <typename T>
void matmul_tn_acc(const T* __restrict a, const T* __restrict b, T* __restrict c, std::size_t m, std::size_t k,
                   std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* ai = a + i * k;
        const T* bi = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T v = ai[p];
            if (v == T(0)) continue;
            T* cp = c + p * n;
            for (std::size_t j = 0; j < n; ++j) cp[j] += v * bi[j];
        }
    }
}

template <typename T>
void transpose(const T* src, T* dst, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

// C[M,K] += A[M,N] * B[K,N]^T
template <typename T>
void matmul_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k,
                   std::vector<T>& scratch) {
    scratch.resize(n * k);
    transpose(b, scratch.data(), k, n);
    matmul_acc(a, scratch.data(), c, m, n, k);
}

// y[M,N] = x[M,K] * W[K,N] + bias[N]
template <typename T>
void linear(const T* x, const T* w, const T* bias, T* y, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        T* yi = y + i * n;
        if (bias) {
            std::copy(bias, bias + n, yi);
        } else {
            std::fill(yi, yi + n, T(0));
        }
    }
    matmul_acc(x, w, y, m, k, n);
}

// Returns the inverse standard deviation so backward can reuse it.
template <typename T>
T layer_norm_row(const T* x, const T* gain, const T* bias, T eps, T* y, std::size_t n, T* mean_out = nullptr) {
    T mean = 0;
    for (std::size_t j = 0; j < n; ++j) mean += x[j];
    mean /= static_cast<T>(n);
    T var = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const T d = x[j] - mean;
        var += d * d;
    }
    var /= static_cast<T>(n);
    const T rstd = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) y[j] = (x[j] - mean) * rstd * gain[j] + bias[j];
    if (mean_out) *mean_out = mean;
    return rstd;
}

template <typename T>
T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(M_SQRT1_2)));
}

template <typename T>
T gelu_grad(T x) {
    const T cdf = T(0.5) * (T(1) + std::erf(x * T(M_SQRT1_2)));
    const T pdf = std::exp(T(-0.5) * x * x) * T(0.3989422804014327);
    return cdf + x * pdf;
}

// In-place masked softmax over one row. Masked entries come out exactly 0.
// Returns false when every entry is masked.
template <typename T, typename Valid>
bool softmax_row(T* s, std::size_t n, Valid&& valid) {
    T mx = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
        if (valid(j)) {
            mx = any ? std::max(mx, s[j]) : s[j];
            any = true;
        }
    }
    if (!any) return false;
    T sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (valid(j)) {
            s[j] = std::exp(s[j] - mx);
            sum += s[j];
        } else {
            s[j] = T(0);
        }
    }
    const T inv = T(1) / sum;
    for (std::size_t j = 0; j < n; ++j) s[j] *= inv;
    return true;
}

// One query row of one head against `n_keys` cached key/value rows.
// q points at the head slice, k/v at the head slice of row 0 with the given
// row stride. probs receives the normalized weights (length n_keys).
template <typename T, typename Valid>
void attend_row(const T* q, const T* k, const T* v, std::size_t stride, std::size_t head_dim,
                std::size_t n_keys, T scale, Valid&& valid, T* probs, T* out) {
    for (std::size_t j = 0; j < n_keys; ++j) {
        if (!valid(j)) {
            probs[j] = T(0);
            continue;
        }
        const T* kj = k + j * stride;
        T dot = 0;
        for (std::size_t t = 0; t < head_dim; ++t) dot += q[t] * kj[t];
        probs[j] = dot * scale;
    }
    if (!softmax_row(probs, n_keys, valid)) throw std::domain_error("degenerate attention row");
    std::fill(out, out + head_dim, T(0));
    for (std::size_t j = 0; j < n_keys; ++j) {
        if (!valid(j)) continue;
        const T p = probs[j];
        const T* vj = v + j * stride;
        for (std::size_t t = 0; t < head_dim; ++t) out[t] += p * vj[t];
    }
}

}  // namespace endo::kernels
