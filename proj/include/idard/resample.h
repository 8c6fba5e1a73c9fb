#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "idard/image.h"

namespace idard::resample {

enum class KernelKind { kNearest, kBilinear, kBicubic, kLanczos3, kBox };

std::string_view KernelName(KernelKind kind);
std::optional<KernelKind> ParseKernel(std::string_view name);

// Keys cubic coefficient used for kBicubic.
inline constexpr double kBicubicA = -0.5;
inline constexpr int kLanczosSupport = 3;

// Sample-grid convention: pixel centres at (i + 0.5) / n.
inline constexpr std::string_view kGridConvention = "align-centers";

// Evaluates the continuous 1-D kernel at x (in input-sample units).
double KernelWeight(KernelKind kind, double x);

// Output is ceil(h/s) x ceil(w/s). Area-reducing kernels are stretched by s
// (anti-aliasing); nearest takes the top-left sample of each block; box
// averages each s x s block. Partial edge blocks sample with clamp-to-edge.
// Throws InvalidScale if s < 1 or s exceeds either dimension.
Raster Downscale(const Raster& img, int factor, KernelKind kind);

// Deviation-weighted downscale: each input pixel p in the footprint of output
// q gets weight (|I_p - g_q| / sqrt(C))^lambda where g is the box-downscaled
// guidance. Falls back to the box mean when all weights vanish.
Raster DpidDownscale(const Raster& img, int factor, double lambda = 1.0);

inline constexpr double kDefaultDpidLambda = 1.0;

// Output is h*s x w*s; interpolation with the unscaled kernel.
Raster Upscale(const Raster& img, int factor, KernelKind kind);

}  // namespace idard::resample
