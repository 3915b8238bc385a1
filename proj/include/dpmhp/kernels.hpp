#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

/// Data-parallel inner loops with a scalar reference and SIMD variants.
///
/// All variants perform the same floating-point operations in the same
/// order, so results are bit-identical across variants; the SIMD versions
/// only spread independent lanes over vector registers. The library is
/// compiled with -ffp-contract=off so that neither side fuses mul+add.
namespace dpmhp::kernels {

struct KernelTable {
  const char* name;

  /// out[r] = sum_j (rows[r*dim + j] - query[j])^2, summed in order j = 0..dim-1.
  void (*squared_distances)(const double* rows, std::size_t count, std::size_t dim,
                            const double* query, double* out);

  /// y[i] = y[i] + alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  /// Dot product with four interleaved partial sums: lane k accumulates
  /// indices i = k (mod 4) over the 4-aligned prefix, the lanes combine as
  /// (s0 + s1) + (s2 + s3), then the tail is added sequentially.
  double (*dot)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_table() noexcept;
const KernelTable* avx2_table() noexcept;  // nullptr unless compiled in and supported by the CPU
const KernelTable* neon_table() noexcept;

/// All variants usable on this machine, scalar first.
std::vector<const KernelTable*> available();

/// The variant used by the library. Picks the widest supported ISA on first
/// use unless DPMHP_KERNELS names another one.
const KernelTable& active() noexcept;

/// Force a variant by name ("scalar", "avx2", "neon"). Returns false if it
/// is not available here.
bool select(std::string_view name) noexcept;

} // namespace dpmhp::kernels
