#include "idard/resample.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "idard/error.h"

namespace idard::resample {
namespace {

// Taps contributing to one output sample along one axis.
struct Contribution {
  std::vector<int> index;
  std::vector<double> weight;
};

using ContributionTable = std::vector<Contribution>;

double Radius(KernelKind kind) {
  switch (kind) {
    case KernelKind::kBilinear: return 1.0;
    case KernelKind::kBicubic: return 2.0;
    case KernelKind::kLanczos3: return kLanczosSupport;
    case KernelKind::kBox: return 0.5;
    case KernelKind::kNearest: return 0.5;
  }
  return 0.0;
}

double Sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

void Normalize(Contribution& c) {
  double sum = 0.0;
  for (double w : c.weight) sum += w;
  for (double& w : c.weight) w /= sum;
}

// Filtered reduction by `factor`: output centre j maps to input coordinate
// (j + 0.5) * factor - 0.5 and the kernel is stretched by `factor`.
ContributionTable ReductionTable(int in_size, int factor, KernelKind kind) {
  const int out_size = (in_size + factor - 1) / factor;
  const double radius = Radius(kind) * factor;
  ContributionTable table(out_size);
  for (int j = 0; j < out_size; ++j) {
    const double centre = (j + 0.5) * factor - 0.5;
    const int lo = static_cast<int>(std::floor(centre - radius));
    const int hi = static_cast<int>(std::ceil(centre + radius));
    Contribution& c = table[j];
    for (int i = lo; i <= hi; ++i) {
      const double w = KernelWeight(kind, (i - centre) / factor);
      if (w == 0.0) continue;
      c.index.push_back(std::clamp(i, 0, in_size - 1));
      c.weight.push_back(w);
    }
    Normalize(c);
  }
  return table;
}

ContributionTable EnlargementTable(int in_size, int factor, KernelKind kind) {
  const int out_size = in_size * factor;
  const double radius = Radius(kind);
  ContributionTable table(out_size);
  for (int j = 0; j < out_size; ++j) {
    Contribution& c = table[j];
    if (kind == KernelKind::kNearest || kind == KernelKind::kBox) {
      c.index.push_back(j / factor);
      c.weight.push_back(1.0);
      continue;
    }
    const double centre = (j + 0.5) / factor - 0.5;
    const int lo = static_cast<int>(std::floor(centre - radius));
    const int hi = static_cast<int>(std::ceil(centre + radius));
    for (int i = lo; i <= hi; ++i) {
      const double w = KernelWeight(kind, i - centre);
      if (w == 0.0) continue;
      c.index.push_back(std::clamp(i, 0, in_size - 1));
      c.weight.push_back(w);
    }
    Normalize(c);
  }
  return table;
}

// Applies row and column tables separably; clips only at the end.
Raster ApplySeparable(const Raster& img, const ContributionTable& rows,
                      const ContributionTable& cols) {
  const int in_w = img.width();
  const int in_h = img.height();
  const int ch = img.channels();
  const int out_w = static_cast<int>(cols.size());
  const int out_h = static_cast<int>(rows.size());
  auto in = img.samples();

  std::vector<double> tmp(static_cast<std::size_t>(in_h) * out_w * ch);
  for (int y = 0; y < in_h; ++y) {
    const double* src = in.data() + static_cast<std::size_t>(y) * in_w * ch;
    double* dst = tmp.data() + static_cast<std::size_t>(y) * out_w * ch;
    for (int x = 0; x < out_w; ++x) {
      const Contribution& c = cols[x];
      for (int k = 0; k < ch; ++k) {
        double acc = 0.0;
        for (std::size_t t = 0; t < c.index.size(); ++t) {
          acc += c.weight[t] * src[c.index[t] * ch + k];
        }
        dst[x * ch + k] = acc;
      }
    }
  }

  const std::size_t row_len = static_cast<std::size_t>(out_w) * ch;
  std::vector<double> out(static_cast<std::size_t>(out_h) * row_len, 0.0);
  for (int y = 0; y < out_h; ++y) {
    const Contribution& c = rows[y];
    double* dst = out.data() + y * row_len;
    for (std::size_t t = 0; t < c.index.size(); ++t) {
      const double w = c.weight[t];
      const double* src = tmp.data() + c.index[t] * row_len;
      for (std::size_t i = 0; i < row_len; ++i) dst[i] += w * src[i];
    }
  }
  return Raster::Clipped(out_h, out_w, ch, std::move(out));
}

void CheckFactor(const Raster& img, int factor) {
  if (factor < 1) {
    throw InvalidScale("scale factor must be >= 1, got " + std::to_string(factor));
  }
  if (factor > img.height() || factor > img.width()) {
    throw InvalidScale("scale factor " + std::to_string(factor) +
                       " exceeds image dims " + std::to_string(img.height()) +
                       "x" + std::to_string(img.width()));
  }
}

Raster NearestDown(const Raster& img, int factor) {
  const int out_h = (img.height() + factor - 1) / factor;
  const int out_w = (img.width() + factor - 1) / factor;
  const int ch = img.channels();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(out_h) * out_w * ch);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < ch; ++c) out.push_back(img.at(y * factor, x * factor, c));
    }
  }
  return Raster(out_h, out_w, ch, std::move(out));
}

// Block mean, summed in row-major order over the clamped footprint. DPID with
// lambda = 0 reproduces exactly this summation.
Raster BoxDown(const Raster& img, int factor) {
  const int out_h = (img.height() + factor - 1) / factor;
  const int out_w = (img.width() + factor - 1) / factor;
  const int ch = img.channels();
  const double count = static_cast<double>(factor) * factor;
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w * ch);
  std::vector<double> acc(ch);
  for (int qy = 0; qy < out_h; ++qy) {
    for (int qx = 0; qx < out_w; ++qx) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int dy = 0; dy < factor; ++dy) {
        const int y = std::min(qy * factor + dy, img.height() - 1);
        for (int dx = 0; dx < factor; ++dx) {
          const int x = std::min(qx * factor + dx, img.width() - 1);
          for (int c = 0; c < ch; ++c) acc[c] += img.at(y, x, c);
        }
      }
      for (int c = 0; c < ch; ++c) {
        out[(static_cast<std::size_t>(qy) * out_w + qx) * ch + c] = acc[c] / count;
      }
    }
  }
  return Raster::Clipped(out_h, out_w, ch, std::move(out));
}

}  // namespace

std::string_view KernelName(KernelKind kind) {
  switch (kind) {
    case KernelKind::kNearest: return "nearest";
    case KernelKind::kBilinear: return "bilinear";
    case KernelKind::kBicubic: return "bicubic";
    case KernelKind::kLanczos3: return "lanczos3";
    case KernelKind::kBox: return "box";
  }
  return "unknown";
}

std::optional<KernelKind> ParseKernel(std::string_view name) {
  for (KernelKind k : {KernelKind::kNearest, KernelKind::kBilinear,
                       KernelKind::kBicubic, KernelKind::kLanczos3,
                       KernelKind::kBox}) {
    if (name == KernelName(k)) return k;
  }
  if (name == "lanczos") return KernelKind::kLanczos3;
  return std::nullopt;
}

double KernelWeight(KernelKind kind, double x) {
  const double ax = std::abs(x);
  switch (kind) {
    case KernelKind::kNearest:
    case KernelKind::kBox:
      return (ax < 0.5 || x == -0.5) ? 1.0 : 0.0;
    case KernelKind::kBilinear:
      return ax < 1.0 ? 1.0 - ax : 0.0;
    case KernelKind::kBicubic: {
      constexpr double a = kBicubicA;
      if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
      if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
      return 0.0;
    }
    case KernelKind::kLanczos3:
      if (ax >= kLanczosSupport) return 0.0;
      return Sinc(x) * Sinc(x / kLanczosSupport);
  }
  return 0.0;
}

Raster Downscale(const Raster& img, int factor, KernelKind kind) {
  CheckFactor(img, factor);
  if (factor == 1) return img;
  switch (kind) {
    case KernelKind::kNearest: return NearestDown(img, factor);
    case KernelKind::kBox: return BoxDown(img, factor);
    default:
      return ApplySeparable(img, ReductionTable(img.height(), factor, kind),
                            ReductionTable(img.width(), factor, kind));
  }
}

Raster DpidDownscale(const Raster& img, int factor, double lambda) {
  if (!(lambda >= 0.0)) {
    throw InvalidArgument("dpid lambda must be >= 0, got " + std::to_string(lambda));
  }
  CheckFactor(img, factor);
  if (factor == 1) return img;
  const Raster guide = BoxDown(img, factor);
  const int out_h = guide.height();
  const int out_w = guide.width();
  const int ch = img.channels();
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(ch));
  std::vector<double> out(guide.size());
  std::vector<double> acc(ch);
  for (int qy = 0; qy < out_h; ++qy) {
    for (int qx = 0; qx < out_w; ++qx) {
      std::fill(acc.begin(), acc.end(), 0.0);
      double weight_sum = 0.0;
      for (int dy = 0; dy < factor; ++dy) {
        const int y = std::min(qy * factor + dy, img.height() - 1);
        for (int dx = 0; dx < factor; ++dx) {
          const int x = std::min(qx * factor + dx, img.width() - 1);
          double dist2 = 0.0;
          for (int c = 0; c < ch; ++c) {
            const double d = img.at(y, x, c) - guide.at(qy, qx, c);
            dist2 += d * d;
          }
          const double w = std::pow(std::sqrt(dist2) * inv_sqrt_c, lambda);
          weight_sum += w;
          for (int c = 0; c < ch; ++c) acc[c] += w * img.at(y, x, c);
        }
      }
      const std::size_t base = (static_cast<std::size_t>(qy) * out_w + qx) * ch;
      for (int c = 0; c < ch; ++c) {
        out[base + c] = weight_sum > 0.0 ? acc[c] / weight_sum : guide.at(qy, qx, c);
      }
    }
  }
  return Raster::Clipped(out_h, out_w, ch, std::move(out));
}

Raster Upscale(const Raster& img, int factor, KernelKind kind) {
  if (factor < 1) {
    throw InvalidScale("scale factor must be >= 1, got " + std::to_string(factor));
  }
  if (factor == 1) return img;
  return ApplySeparable(img, EnlargementTable(img.height(), factor, kind),
                        EnlargementTable(img.width(), factor, kind));
}

}  // namespace idard::resample
