#include <atomic>
#include <cstdlib>
#include <string>

#include "cropref/simd.hpp"

namespace cropref::simd {
namespace {

bool cpu_has_avx2() {
#if defined(CROPREF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable* table_for(Level level) {
  if (level == Level::Avx2 && cpu_has_avx2()) return avx2_kernels();
  return &scalar_kernels();
}

Level initial_level() {
  if (const char* env = std::getenv("CROPREF_SIMD")) {
    if (std::string(env) == "scalar") return Level::Scalar;
  }
  return detected_level();
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{table_for(initial_level())};
  return table;
}

const KernelTable& kernels() {
  return *active_table().load(std::memory_order_relaxed);
}

}  // namespace

std::string_view to_string(Level level) {
  return level == Level::Avx2 ? "avx2" : "scalar";
}

Level detected_level() {
  return cpu_has_avx2() && avx2_kernels() != nullptr ? Level::Avx2
                                                     : Level::Scalar;
}

Level active_level() {
  return &kernels() == &scalar_kernels() ? Level::Scalar : Level::Avx2;
}

bool set_active_level(Level level) {
  if (level == Level::Avx2 && detected_level() != Level::Avx2) return false;
  active_table().store(table_for(level), std::memory_order_relaxed);
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels().axpy(alpha, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

void ndvi(std::span<const double> nir, std::span<const double> red,
          double nodata, std::span<double> out) {
  kernels().ndvi(nir.data(), red.data(), nodata, out.data(), out.size());
}

void evi(std::span<const double> nir, std::span<const double> red,
         std::span<const double> blue, double nodata, std::span<double> out) {
  kernels().evi(nir.data(), red.data(), blue.data(), nodata, out.data(),
                out.size());
}

void endvi(std::span<const double> nir, std::span<const double> green,
           std::span<const double> blue, double nodata, std::span<double> out) {
  kernels().endvi(nir.data(), green.data(), blue.data(), nodata, out.data(),
                  out.size());
}

void lswi(std::span<const double> nir, std::span<const double> swir1,
          double nodata, std::span<double> out) {
  kernels().lswi(nir.data(), swir1.data(), nodata, out.data(), out.size());
}

}  // namespace cropref::simd
