#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "idard/image.h"

namespace idard {
class Backend;
}

namespace idard::metrics {

enum class DistortionKind { kPsnr, kSsim, kMsSsim, kOneMinusMsSsim, kLpipsRemote };

std::string_view DistortionName(DistortionKind kind);
std::optional<DistortionKind> ParseDistortion(std::string_view name);

// True for the lower-is-better kinds the estimator accepts.
bool IsDistortion(DistortionKind kind);

struct MsePsnr {
  double mse = 0.0;
  // Empty when mse == 0 (infinite PSNR).
  std::optional<double> psnr;
};

// Peak 1.0. Throws DimensionError on shape mismatch.
MsePsnr ComputeMsePsnr(const Raster& a, const Raster& b);

// Standard SSIM parameters: Gaussian window, K1, K2, dynamic range L = 1.
struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

// Channel-averaged means of the SSIM map and of its contrast-structure term
// over all fully-contained windows.
struct SsimStats {
  double ssim = 0.0;
  double cs = 0.0;
};

// Window shrinks to the largest odd size <= min(h, w) on small images.
SsimStats ComputeSsimStats(const Raster& a, const Raster& b,
                           const SsimParams& params = {});

double Ssim(const Raster& a, const Raster& b, const SsimParams& params = {});

inline constexpr double kMsSsimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

// Number of scales used for an image of this size (<= 5; 0 if too small).
int MsSsimScaleCount(int height, int width, int window = 11);

// Five-scale MS-SSIM with 2x2-mean downsampling between scales. Scales that do
// not fit an 11x11 window are dropped and the remaining weights renormalised.
// Negative per-scale terms are clamped to 0 before exponentiation.
double MsSsim(const Raster& a, const Raster& b, const SsimParams& params = {});

// Lower-is-better distortion. kOneMinusMsSsim = max(0, 1 - MS-SSIM);
// kLpipsRemote asks `backend` (BackendError if null or unreachable).
// Similarity kinds raise InvalidArgument.
double Distortion(DistortionKind kind, const Raster& a, const Raster& b,
                  Backend* backend = nullptr);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population (divide by N)
};

MeanStd ComputeMeanStd(std::span<const double> samples);

}  // namespace idard::metrics
