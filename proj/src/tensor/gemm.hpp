#pragma once

#include <cstddef>
#include <vector>

namespace sft::detail {

// C[m x n] += op(A) . op(B), row-major, fixed summation order.
// op(A) is A[m x k] or, when trans_a, A[k x m] transposed.
// op(B) is B[k x n] or, when trans_b, B[n x k] transposed.
//
// Each output row of the non-transposed-A form depends only on the matching
// row of A, which keeps causal attention exactly position-local.
inline void gemm_acc(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                     const float* a, const float* b, float* c) {
  std::vector<float> bt;
  if (trans_b) {
    bt.resize(k * n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    }
    b = bt.data();
  }
  if (!trans_a) {
    for (std::size_t i = 0; i < m; ++i) {
      float* crow = c + i * n;
      const float* arow = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const float av = arow[p];
        const float* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    for (std::size_t p = 0; p < k; ++p) {
      const float* arow = a + p * m;
      const float* brow = b + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const float av = arow[i];
        float* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

}  // namespace sft::detail
