#pragma once

#include <span>

#include "patchsel/image.hpp"

namespace patchsel::mosaic {

inline constexpr double kPsnrCap = 100.0;

// Mean squared error after clamping both inputs to [0,1].
double clamped_mse(std::span<const double> a, std::span<const double> b);

// Converts an MSE to PSNR in dB; returns kPsnrCap when mse < 1e-12.
double psnr_from_mse(double mse, double peak = 1.0);

// 10 log10(peak^2 / MSE) on [0,1]-clamped inputs. Symmetric in its arguments.
double psnr(std::span<const double> a, std::span<const double> b, double peak = 1.0);
double psnr(const Image& a, const Image& b, double peak = 1.0);

}  // namespace patchsel::mosaic
