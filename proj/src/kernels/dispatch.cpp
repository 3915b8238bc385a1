#include "dpmhp/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace dpmhp::kernels {

#if defined(DPMHP_HAVE_AVX2)
const KernelTable* avx2_table_unchecked() noexcept;
#endif
#if defined(DPMHP_HAVE_NEON)
const KernelTable* neon_table_unchecked() noexcept;
#endif

const KernelTable* avx2_table() noexcept {
#if defined(DPMHP_HAVE_AVX2)
  if (__builtin_cpu_supports("avx2")) return avx2_table_unchecked();
#endif
  return nullptr;
}

const KernelTable* neon_table() noexcept {
#if defined(DPMHP_HAVE_NEON)
  return neon_table_unchecked();  // mandatory on aarch64
#else
  return nullptr;
#endif
}

std::vector<const KernelTable*> available() {
  std::vector<const KernelTable*> out{&scalar_table()};
  if (auto* t = avx2_table()) out.push_back(t);
  if (auto* t = neon_table()) out.push_back(t);
  return out;
}

namespace {

const KernelTable* find(std::string_view name) noexcept {
  if (name == "scalar") return &scalar_table();
  if (name == "avx2") return avx2_table();
  if (name == "neon") return neon_table();
  return nullptr;
}

const KernelTable* pick_default() noexcept {
  if (const char* env = std::getenv("DPMHP_KERNELS")) {
    if (auto* t = find(env)) return t;
  }
  if (auto* t = avx2_table()) return t;
  if (auto* t = neon_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& slot() noexcept {
  static std::atomic<const KernelTable*> current{pick_default()};
  return current;
}

} // namespace

const KernelTable& active() noexcept { return *slot().load(std::memory_order_acquire); }

bool select(std::string_view name) noexcept {
  const KernelTable* t = find(name);
  if (!t) return false;
  slot().store(t, std::memory_order_release);
  return true;
}

} // namespace dpmhp::kernels
