#include "dpmhp/kernels.hpp"

namespace dpmhp::kernels {
namespace {

void squared_distances(const double* rows, std::size_t count, std::size_t dim,
                       const double* query, double* out) {
  for (std::size_t r = 0; r < count; ++r) {
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
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 = s0 + a[i] * b[i];
    s1 = s1 + a[i + 1] * b[i + 1];
    s2 = s2 + a[i + 2] * b[i + 2];
    s3 = s3 + a[i + 3] * b[i + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) s = s + a[i] * b[i];
  return s;
}

constexpr KernelTable kTable{"scalar", &squared_distances, &axpy, &dot};

} // namespace

const KernelTable& scalar_table() noexcept { return kTable; }

} // namespace dpmhp::kernels
