#pragma once

#include <cstddef>

namespace sprout::detail {

// C[M,N] (+)= A[M,K] * B[K,N], all row-major. Each C element accumulates its
// k terms in ascending order, so results do not depend on blocking.
template <typename T>
void gemm(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b,
          T* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
    }
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[K,N] (+)= A[M,K]^T * B[M,N]; accumulation runs over ascending m.
template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a,
             const T* b, T* c, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < k * n; ++i) c[i] = T(0);
  }
  for (std::size_t r = 0; r < m; ++r) {
    const T* arow = a + r * k;
    const T* brow = b + r * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      T* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

}  // namespace sprout::detail
