#include "idard/metrics.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "idard/backend.h"
#include "idard/error.h"

namespace idard::metrics {
namespace {

void CheckShapes(const Raster& a, const Raster& b) {
  if (!a.SameShape(b)) {
    throw DimensionError("shape mismatch: " + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + "x" + std::to_string(a.channels()) +
                         " vs " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()) + "x" + std::to_string(b.channels()));
  }
}

std::vector<double> WindowTaps(int size, double sigma) {
  std::vector<double> taps(size);
  const int r = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double x = i - r;
    taps[i] = std::exp(-(x * x) / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Single-channel plane.
struct Plane {
  int h = 0;
  int w = 0;
  std::vector<double> v;
};

Plane ExtractChannel(const Raster& img, int c) {
  Plane p{img.height(), img.width(), std::vector<double>(img.pixel_count())};
  auto s = img.samples();
  const int ch = img.channels();
  for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = s[i * ch + c];
  return p;
}

// 'Valid' separable filtering: output (h - k + 1) x (w - k + 1).
Plane FilterValid(const Plane& in, const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int ow = in.w - k + 1;
  const int oh = in.h - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(in.h) * ow);
  for (int y = 0; y < in.h; ++y) {
    const double* row = in.v.data() + static_cast<std::size_t>(y) * in.w;
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += taps[t] * row[x + t];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  Plane out{oh, ow, std::vector<double>(static_cast<std::size_t>(oh) * ow, 0.0)};
  for (int y = 0; y < oh; ++y) {
    double* dst = out.v.data() + static_cast<std::size_t>(y) * ow;
    for (int t = 0; t < k; ++t) {
      const double* src = tmp.data() + static_cast<std::size_t>(y + t) * ow;
      for (int x = 0; x < ow; ++x) dst[x] += taps[t] * src[x];
    }
  }
  return out;
}

SsimStats PlaneStats(const Plane& a, const Plane& b, const std::vector<double>& taps,
                     const SsimParams& params) {
  const double c1 = (params.k1) * (params.k1);
  const double c2 = (params.k2) * (params.k2);
  Plane aa = a, bb = b, ab = a;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    aa.v[i] = a.v[i] * a.v[i];
    bb.v[i] = b.v[i] * b.v[i];
    ab.v[i] = a.v[i] * b.v[i];
  }
  const Plane mu_a = FilterValid(a, taps);
  const Plane mu_b = FilterValid(b, taps);
  const Plane e_aa = FilterValid(aa, taps);
  const Plane e_bb = FilterValid(bb, taps);
  const Plane e_ab = FilterValid(ab, taps);
  double ssim_sum = 0.0, cs_sum = 0.0;
  for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
    const double ma = mu_a.v[i], mb = mu_b.v[i];
    const double var_a = e_aa.v[i] - ma * ma;
    const double var_b = e_bb.v[i] - mb * mb;
    const double cov = e_ab.v[i] - ma * mb;
    const double cs = (2.0 * cov + c2) / (var_a + var_b + c2);
    const double lum = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    ssim_sum += lum * cs;
    cs_sum += cs;
  }
  const double n = static_cast<double>(mu_a.v.size());
  return {ssim_sum / n, cs_sum / n};
}

int EffectiveWindow(int height, int width, int window) {
  int size = std::min({window, height, width});
  if (size % 2 == 0) --size;
  return size;
}

SsimStats StatsWithWindow(const Raster& a, const Raster& b, int window,
                          const SsimParams& params) {
  const std::vector<double> taps = WindowTaps(window, params.sigma);
  SsimStats total;
  for (int c = 0; c < a.channels(); ++c) {
    const SsimStats s = PlaneStats(ExtractChannel(a, c), ExtractChannel(b, c), taps, params);
    total.ssim += s.ssim;
    total.cs += s.cs;
  }
  total.ssim /= a.channels();
  total.cs /= a.channels();
  return total;
}

// 2x2 mean, dropping an odd trailing row/column.
Raster HalveByMean(const Raster& img) {
  const int oh = img.height() / 2;
  const int ow = img.width() / 2;
  const int ch = img.channels();
  std::vector<double> out(static_cast<std::size_t>(oh) * ow * ch);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      for (int c = 0; c < ch; ++c) {
        out[(static_cast<std::size_t>(y) * ow + x) * ch + c] =
            0.25 * (img.at(2 * y, 2 * x, c) + img.at(2 * y, 2 * x + 1, c) +
                    img.at(2 * y + 1, 2 * x, c) + img.at(2 * y + 1, 2 * x + 1, c));
      }
    }
  }
  return Raster::Clipped(oh, ow, ch, std::move(out));
}

}  // namespace

std::string_view DistortionName(DistortionKind kind) {
  switch (kind) {
    case DistortionKind::kPsnr: return "psnr";
    case DistortionKind::kSsim: return "ssim";
    case DistortionKind::kMsSsim: return "ms_ssim";
    case DistortionKind::kOneMinusMsSsim: return "one_minus_msssim";
    case DistortionKind::kLpipsRemote: return "lpips_remote";
  }
  return "unknown";
}

std::optional<DistortionKind> ParseDistortion(std::string_view name) {
  for (DistortionKind k : {DistortionKind::kPsnr, DistortionKind::kSsim,
                           DistortionKind::kMsSsim, DistortionKind::kOneMinusMsSsim,
                           DistortionKind::kLpipsRemote}) {
    if (name == DistortionName(k)) return k;
  }
  return std::nullopt;
}

bool IsDistortion(DistortionKind kind) {
  return kind == DistortionKind::kOneMinusMsSsim || kind == DistortionKind::kLpipsRemote;
}

MsePsnr ComputeMsePsnr(const Raster& a, const Raster& b) {
  CheckShapes(a, b);
  auto sa = a.samples();
  auto sb = b.samples();
  double sum = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double d = sa[i] - sb[i];
    sum += d * d;
  }
  MsePsnr r;
  r.mse = sum / static_cast<double>(sa.size());
  if (r.mse > 0.0) r.psnr = 10.0 * std::log10(1.0 / r.mse);
  return r;
}

SsimStats ComputeSsimStats(const Raster& a, const Raster& b, const SsimParams& params) {
  CheckShapes(a, b);
  return StatsWithWindow(a, b, EffectiveWindow(a.height(), a.width(), params.window),
                         params);
}

double Ssim(const Raster& a, const Raster& b, const SsimParams& params) {
  return ComputeSsimStats(a, b, params).ssim;
}

int MsSsimScaleCount(int height, int width, int window) {
  int scales = 0;
  int h = height, w = width;
  while (scales < 5 && h >= window && w >= window) {
    ++scales;
    h /= 2;
    w /= 2;
  }
  return scales;
}

double MsSsim(const Raster& a, const Raster& b, const SsimParams& params) {
  CheckShapes(a, b);
  const int scales = MsSsimScaleCount(a.height(), a.width(), params.window);
  if (scales == 0) {
    throw DimensionError("image " + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " is too small for MS-SSIM (needs >= " +
                         std::to_string(params.window) + " per side)");
  }
  double weight_sum = 0.0;
  for (int j = 0; j < scales; ++j) weight_sum += kMsSsimWeights[j];

  Raster x = a, y = b;
  double result = 1.0;
  for (int j = 0; j < scales; ++j) {
    const SsimStats s = StatsWithWindow(x, y, params.window, params);
    const double weight = kMsSsimWeights[j] / weight_sum;
    const double term = (j == scales - 1) ? s.ssim : s.cs;
    result *= std::pow(std::max(term, 0.0), weight);
    if (j + 1 < scales) {
      x = HalveByMean(x);
      y = HalveByMean(y);
    }
  }
  return result;
}

double Distortion(DistortionKind kind, const Raster& a, const Raster& b, Backend* backend) {
  switch (kind) {
    case DistortionKind::kOneMinusMsSsim:
      return std::max(0.0, 1.0 - MsSsim(a, b));
    case DistortionKind::kLpipsRemote: {
      CheckShapes(a, b);
      if (backend == nullptr) {
        throw BackendError("<unconfigured>", "METRIC",
                           "lpips_remote needs a configured backend endpoint");
      }
      return std::max(0.0, backend->Metric("lpips", a, b));
    }
    default:
      throw InvalidArgument(std::string(DistortionName(kind)) +
                            " is a similarity measure, not a distortion");
  }
}

MeanStd ComputeMeanStd(std::span<const double> samples) {
  if (samples.empty()) throw InvalidArgument("mean_std of an empty list");
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mean = sum / static_cast<double>(samples.size());
  double sq = 0.0;
  for (double v : samples) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(samples.size()))};
}

}  // namespace idard::metrics
