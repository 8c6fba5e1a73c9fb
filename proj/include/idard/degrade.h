#pragma once

#include <array>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "idard/image.h"
#include "idard/resample.h"
#include "idard/rng.h"

namespace idard::degrade {

struct GaussBlur {
  double sigma = 1.0;
  int ksize = 3;
};

struct GaussNoise {
  double sigma = 0.0;
  // Extra tag mixed into the stream key so two noise ops in one spec differ.
  std::uint64_t seed_salt = 0;
};

struct Contrast {
  double c = 1.0;
};

struct QuantizeOtsu {
  int n_thresholds = 1;
};

using DegradationOp = std::variant<GaussBlur, GaussNoise, Contrast, QuantizeOtsu>;

enum class Order { kAfterDownscale, kBeforeDownscale };

// An ordered composition of degradation ops (an empty list is the identity)
// and where it applies relative to the base downscale.
struct DegradationSpec {
  std::vector<DegradationOp> ops;
  Order order = Order::kAfterDownscale;
};

// Throws InvalidArgument if any op parameter is out of range.
void Validate(const DegradationSpec& spec);

std::string Describe(const DegradationOp& op);
std::string Describe(const DegradationSpec& spec);
std::string_view OrderName(Order order);

// Normalised 1-D Gaussian taps over x in [-(k-1)/2, (k-1)/2].
std::vector<double> GaussianTaps(double sigma, int ksize);

Raster GaussianBlur(const Raster& img, double sigma, int ksize);

// clip(img + n), n ~ N(0, sigma^2) i.i.d. per sample from the keyed stream.
Raster GaussianNoise(const Raster& img, double sigma, const StreamKey& key);

// The noise field GaussianNoise would add, before clipping.
std::vector<double> NoiseField(std::size_t count, double sigma, const StreamKey& key);

// clip(0.5 + c * (v - 0.5)).
Raster AdjustContrast(const Raster& img, double c);

// Multilevel Otsu over the 256-bin luminance histogram. Thresholds are bin
// indices t in [1, 255]; class k holds bins [t_{k-1}, t_k).
std::vector<int> OtsuThresholds(const std::array<double, 256>& histogram, int n);

// Same objective; exhaustive search (n <= 2) and dynamic programming (any n).
// OtsuThresholds dispatches between them.
std::vector<int> OtsuThresholdsExhaustive(const std::array<double, 256>& histogram, int n);
std::vector<int> OtsuThresholdsDp(const std::array<double, 256>& histogram, int n);

std::array<double, 256> LuminanceHistogram(const Raster& img);

// Maps each channel sample to the midpoint of its threshold bin in [0, 1].
Raster ApplyThresholds(const Raster& img, const std::vector<int>& thresholds);

Raster QuantizeOtsuImage(const Raster& img, int n_thresholds);

// Applies one op; `key` feeds the noise stream.
Raster ApplyOp(const DegradationOp& op, const Raster& img, const StreamKey& key);

// Applies ops left to right; op k draws from key.With("degrade").With(k).
Raster ApplyOps(const std::vector<DegradationOp>& ops, const Raster& img,
                const StreamKey& key);

using BaseDownscaler = std::function<Raster(const Raster&)>;

// after: ops(base(img)); before: base(ops(img)).
Raster ApplySpec(const DegradationSpec& spec, const BaseDownscaler& base,
                 const Raster& img, const StreamKey& key);

// Bicubic (by default) downscale followed or preceded by a degradation.
struct SyntheticDownscaler {
  resample::KernelKind base = resample::KernelKind::kBicubic;
  int factor = 8;
  DegradationSpec spec;

  Raster operator()(const Raster& img, const StreamKey& key) const;
};

}  // namespace idard::degrade
