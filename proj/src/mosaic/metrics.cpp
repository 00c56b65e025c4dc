#include "patchsel/mosaic/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "patchsel/error.hpp"

namespace patchsel::mosaic {

double clamped_mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("psnr: inputs differ in size");
  if (a.empty()) throw ShapeError("psnr: empty inputs");
  // extended accumulator: a constant error image gives back exactly d*d
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::clamp(a[i], 0.0, 1.0) - std::clamp(b[i], 0.0, 1.0);
    acc += static_cast<long double>(d * d);
  }
  return static_cast<double>(acc / static_cast<long double>(a.size()));
}

double psnr_from_mse(double mse, double peak) {
  if (mse < 1e-12) return kPsnrCap;
  // split logs: 10*log10(1/0.01) with the quotient formed first lands one ulp off 20
  return 20.0 * std::log10(peak) - 10.0 * std::log10(mse);
}

double psnr(std::span<const double> a, std::span<const double> b, double peak) {
  return psnr_from_mse(clamped_mse(a, b), peak);
}

double psnr(const Image& a, const Image& b, double peak) {
  if (a.height != b.height || a.width != b.width) throw ShapeError("psnr: image shapes differ");
  return psnr(std::span<const double>(a.data), std::span<const double>(b.data), peak);
}

}  // namespace patchsel::mosaic
