#include <cmath>

#include "cropref/simd.hpp"

namespace cropref::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline double ratio_or_nodata(double num, double den, double nodata) {
  return std::fabs(den) < kMinDenominator ? nodata : num / den;
}

void ndvi_scalar(const double* nir, const double* red, double nodata,
                 double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (nir[i] == nodata || red[i] == nodata) {
      out[i] = nodata;
      continue;
    }
    const double num = nir[i] - red[i];
    const double den = nir[i] + red[i];
    out[i] = ratio_or_nodata(num, den, nodata);
  }
}

void evi_scalar(const double* nir, const double* red, const double* blue,
                double nodata, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (nir[i] == nodata || red[i] == nodata || blue[i] == nodata) {
      out[i] = nodata;
      continue;
    }
    const double num = 2.5 * (nir[i] - red[i]);
    const double den = ((nir[i] + 6.0 * red[i]) - 7.0 * blue[i]) + 1.0;
    out[i] = ratio_or_nodata(num, den, nodata);
  }
}

void endvi_scalar(const double* nir, const double* green, const double* blue,
                  double nodata, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (nir[i] == nodata || green[i] == nodata || blue[i] == nodata) {
      out[i] = nodata;
      continue;
    }
    const double veg = nir[i] + green[i];
    const double soil = 2.0 * blue[i];
    out[i] = ratio_or_nodata(veg - soil, veg + soil, nodata);
  }
}

void lswi_scalar(const double* nir, const double* swir1, double nodata,
                 double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (nir[i] == nodata || swir1[i] == nodata) {
      out[i] = nodata;
      continue;
    }
    const double num = nir[i] - swir1[i];
    const double den = nir[i] + swir1[i];
    out[i] = ratio_or_nodata(num, den, nodata);
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{dot_scalar,  axpy_scalar,  ndvi_scalar,
                                 evi_scalar,  endvi_scalar, lswi_scalar};
  return table;
}

}  // namespace cropref::simd
