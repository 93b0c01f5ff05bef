// Compiled with -mavx2 (and without -mfma, so no contraction changes the
// rounding of the index kernels relative to the scalar reference).

#include "cropref/simd.hpp"

#if defined(CROPREF_HAVE_AVX2)

#include <immintrin.h>

namespace cropref::simd {
namespace {

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(
        acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(a + i + 4),
                                             _mm256_loadu_pd(b + i + 4)));
  }
  if (i + 4 <= n) {
    acc0 = _mm256_add_pd(
        acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    i += 4;
  }
  acc0 = _mm256_add_pd(acc0, acc1);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc0);
  double sum = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

inline __m256d abs_pd(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

// Lanes equal to nodata in any input, or with a tiny denominator, get nodata.
inline __m256d finish(__m256d num, __m256d den, __m256d invalid,
                      __m256d vnodata) {
  const __m256d small = _mm256_cmp_pd(abs_pd(den), _mm256_set1_pd(kMinDenominator),
                                      _CMP_LT_OQ);
  const __m256d bad = _mm256_or_pd(invalid, small);
  return _mm256_blendv_pd(_mm256_div_pd(num, den), vnodata, bad);
}

inline __m256d is_nodata(__m256d v, __m256d vnodata) {
  return _mm256_cmp_pd(v, vnodata, _CMP_EQ_OQ);
}

// Scalar tails reuse the reference kernels so both paths agree exactly.
void ndvi_avx2(const double* nir, const double* red, double nodata,
               double* out, std::size_t n) {
  const __m256d vnd = _mm256_set1_pd(nodata);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(nir + i);
    const __m256d r = _mm256_loadu_pd(red + i);
    const __m256d invalid = _mm256_or_pd(is_nodata(a, vnd), is_nodata(r, vnd));
    _mm256_storeu_pd(out + i, finish(_mm256_sub_pd(a, r), _mm256_add_pd(a, r),
                                     invalid, vnd));
  }
  scalar_kernels().ndvi(nir + i, red + i, nodata, out + i, n - i);
}

void evi_avx2(const double* nir, const double* red, const double* blue,
              double nodata, double* out, std::size_t n) {
  const __m256d vnd = _mm256_set1_pd(nodata);
  const __m256d c25 = _mm256_set1_pd(2.5);
  const __m256d c6 = _mm256_set1_pd(6.0);
  const __m256d c7 = _mm256_set1_pd(7.0);
  const __m256d c1 = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(nir + i);
    const __m256d r = _mm256_loadu_pd(red + i);
    const __m256d b = _mm256_loadu_pd(blue + i);
    const __m256d invalid = _mm256_or_pd(
        _mm256_or_pd(is_nodata(a, vnd), is_nodata(r, vnd)), is_nodata(b, vnd));
    const __m256d num = _mm256_mul_pd(c25, _mm256_sub_pd(a, r));
    __m256d den = _mm256_add_pd(a, _mm256_mul_pd(c6, r));
    den = _mm256_sub_pd(den, _mm256_mul_pd(c7, b));
    den = _mm256_add_pd(den, c1);
    _mm256_storeu_pd(out + i, finish(num, den, invalid, vnd));
  }
  scalar_kernels().evi(nir + i, red + i, blue + i, nodata, out + i, n - i);
}

void endvi_avx2(const double* nir, const double* green, const double* blue,
                double nodata, double* out, std::size_t n) {
  const __m256d vnd = _mm256_set1_pd(nodata);
  const __m256d c2 = _mm256_set1_pd(2.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(nir + i);
    const __m256d g = _mm256_loadu_pd(green + i);
    const __m256d b = _mm256_loadu_pd(blue + i);
    const __m256d invalid = _mm256_or_pd(
        _mm256_or_pd(is_nodata(a, vnd), is_nodata(g, vnd)), is_nodata(b, vnd));
    const __m256d veg = _mm256_add_pd(a, g);
    const __m256d soil = _mm256_mul_pd(c2, b);
    _mm256_storeu_pd(out + i, finish(_mm256_sub_pd(veg, soil),
                                     _mm256_add_pd(veg, soil), invalid, vnd));
  }
  scalar_kernels().endvi(nir + i, green + i, blue + i, nodata, out + i, n - i);
}

void lswi_avx2(const double* nir, const double* swir1, double nodata,
               double* out, std::size_t n) {
  const __m256d vnd = _mm256_set1_pd(nodata);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(nir + i);
    const __m256d s = _mm256_loadu_pd(swir1 + i);
    const __m256d invalid = _mm256_or_pd(is_nodata(a, vnd), is_nodata(s, vnd));
    _mm256_storeu_pd(out + i, finish(_mm256_sub_pd(a, s), _mm256_add_pd(a, s),
                                     invalid, vnd));
  }
  scalar_kernels().lswi(nir + i, swir1 + i, nodata, out + i, n - i);
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{dot_avx2,  axpy_avx2,  ndvi_avx2,
                                 evi_avx2,  endvi_avx2, lswi_avx2};
  return &table;
}

}  // namespace cropref::simd

#else

namespace cropref::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace cropref::simd

#endif
