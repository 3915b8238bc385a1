#include "dpmhp/kernels.hpp"

#include <immintrin.h>

namespace dpmhp::kernels {
namespace {

// Four rows per iteration, one lane per row; each lane walks the
// coordinates in order like the scalar loop.
void squared_distances(const double* rows, std::size_t count, std::size_t dim,
                       const double* query, double* out) {
  std::size_t r = 0;
  if (dim == 1) {
    const __m256d q = _mm256_set1_pd(query[0]);
    for (; r + 4 <= count; r += 4) {
      const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(rows + r), q);
      _mm256_storeu_pd(out + r, _mm256_add_pd(_mm256_setzero_pd(), _mm256_mul_pd(d, d)));
    }
  } else {
    const __m256i offsets = _mm256_set_epi64x(3 * static_cast<long long>(dim),
                                              2 * static_cast<long long>(dim),
                                              static_cast<long long>(dim), 0);
    for (; r + 4 <= count; r += 4) {
      const double* base = rows + r * dim;
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t j = 0; j < dim; ++j) {
        const __m256d v = _mm256_i64gather_pd(base + j, offsets, 8);
        const __m256d d = _mm256_sub_pd(v, _mm256_set1_pd(query[j]));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
      }
      _mm256_storeu_pd(out + r, acc);
    }
  }
  for (; r < count; ++r) {
    const double* row = rows + r * dim;
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = row[j] - query[j];
      acc = acc + d * d;
    }
    out[r] = acc;
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(a, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s = s + a[i] * b[i];
  return s;
}

constexpr KernelTable kTable{"avx2", &squared_distances, &axpy, &dot};

} // namespace

const KernelTable* avx2_table_unchecked() noexcept { return &kTable; }

} // namespace dpmhp::kernels
