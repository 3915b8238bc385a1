#include "dpmhp/kernels.hpp"

#include <arm_neon.h>

namespace dpmhp::kernels {
namespace {

// Two rows per iteration, one lane per row.
void squared_distances(const double* rows, std::size_t count, std::size_t dim,
                       const double* query, double* out) {
  std::size_t r = 0;
  for (; r + 2 <= count; r += 2) {
    const double* r0 = rows + r * dim;
    const double* r1 = r0 + dim;
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t j = 0; j < dim; ++j) {
      const double pair[2] = {r0[j], r1[j]};
      const float64x2_t d = vsubq_f64(vld1q_f64(pair), vdupq_n_f64(query[j]));
      acc = vaddq_f64(acc, vmulq_f64(d, d));
    }
    vst1q_f64(out + r, acc);
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
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(a, vld1q_f64(x + i))));
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  // lo holds lanes 0,1 and hi lanes 2,3 of the four-way partial sums.
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double s = (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) +
             (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
  for (; i < n; ++i) s = s + a[i] * b[i];
  return s;
}

constexpr KernelTable kTable{"neon", &squared_distances, &axpy, &dot};

} // namespace

const KernelTable* neon_table_unchecked() noexcept { return &kTable; }

} // namespace dpmhp::kernels
