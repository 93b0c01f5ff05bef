#pragma once

// Data-parallel inner loops used by the network layers and the per-cell
// vegetation index computation. Every kernel has a scalar reference version
// and, on x86-64, an AVX2 version; the active set is chosen once at startup
// from CPUID and can be forced with CROPREF_SIMD=scalar.

#include <cstddef>
#include <span>
#include <string_view>

namespace cropref::simd {

enum class Level { Scalar, Avx2 };

std::string_view to_string(Level level);

// Highest level the running CPU supports (ignores the environment override).
Level detected_level();

// Level currently used by the dispatching entry points below.
Level active_level();

// Switches the dispatch table; returns false if the CPU lacks the level.
bool set_active_level(Level level);

// Dot product. Summation order differs between levels, so results agree to
// rounding, not bit-for-bit.
double dot(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// Vegetation indices over co-registered cell arrays. A cell is `nodata` in
// the output when any input is `nodata` or |denominator| < 1e-12. Both
// levels evaluate the same operation sequence, so outputs are bit-identical.
void ndvi(std::span<const double> nir, std::span<const double> red,
          double nodata, std::span<double> out);
void evi(std::span<const double> nir, std::span<const double> red,
         std::span<const double> blue, double nodata, std::span<double> out);
void endvi(std::span<const double> nir, std::span<const double> green,
           std::span<const double> blue, double nodata, std::span<double> out);
void lswi(std::span<const double> nir, std::span<const double> swir1,
          double nodata, std::span<double> out);

inline constexpr double kMinDenominator = 1e-12;

// Per-level kernel sets, exposed for equivalence tests.
struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*ndvi)(const double*, const double*, double, double*, std::size_t);
  void (*evi)(const double*, const double*, const double*, double, double*,
              std::size_t);
  void (*endvi)(const double*, const double*, const double*, double, double*,
                std::size_t);
  void (*lswi)(const double*, const double*, double, double*, std::size_t);
};

const KernelTable& scalar_kernels();
// nullptr when AVX2 was not compiled in.
const KernelTable* avx2_kernels();

}  // namespace cropref::simd
