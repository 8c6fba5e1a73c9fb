#include "idard/degrade.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "idard/error.h"

namespace idard::degrade {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Prefix sums over the histogram: weight W and first moment S of bins [0, i).
struct HistogramMoments {
  std::array<double, 257> w{};
  std::array<double, 257> s{};

  explicit HistogramMoments(const std::array<double, 256>& h) {
    for (int i = 0; i < 256; ++i) {
      w[i + 1] = w[i] + h[i];
      s[i + 1] = s[i] + h[i] * i;
    }
  }

  // S^2 / W of the class covering bins [lo, hi); empty classes score 0.
  double ClassScore(int lo, int hi) const {
    const double weight = w[hi] - w[lo];
    if (weight <= 0.0) return 0.0;
    const double moment = s[hi] - s[lo];
    return moment * moment / weight;
  }
};

void CheckOtsuCount(int n) {
  if (n < 1 || n > 254) {
    throw InvalidArgument("otsu threshold count must be in [1, 254], got " +
                          std::to_string(n));
  }
}

std::string FormatNumber(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

void Validate(const DegradationSpec& spec) {
  for (const auto& op : spec.ops) {
    std::visit(Overloaded{
                   [](const GaussBlur& b) {
                     if (!(b.sigma > 0.0)) throw InvalidArgument("blur sigma must be > 0");
                     if (b.ksize < 1 || b.ksize % 2 == 0) {
                       throw InvalidArgument("blur ksize must be odd and >= 1, got " +
                                             std::to_string(b.ksize));
                     }
                   },
                   [](const GaussNoise& n) {
                     if (!(n.sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
                   },
                   [](const Contrast& c) {
                     if (!(c.c >= 0.0)) throw InvalidArgument("contrast factor must be >= 0");
                   },
                   [](const QuantizeOtsu& q) { CheckOtsuCount(q.n_thresholds); },
               },
               op);
  }
}

std::string Describe(const DegradationOp& op) {
  return std::visit(
      Overloaded{
          [](const GaussBlur& b) {
            return "blur(sigma=" + FormatNumber(b.sigma) + ",ksize=" +
                   std::to_string(b.ksize) + ")";
          },
          [](const GaussNoise& n) { return "noise(sigma=" + FormatNumber(n.sigma) + ")"; },
          [](const Contrast& c) { return "contrast(c=" + FormatNumber(c.c) + ")"; },
          [](const QuantizeOtsu& q) {
            return "quantize_otsu(n=" + std::to_string(q.n_thresholds) + ")";
          },
      },
      op);
}

std::string Describe(const DegradationSpec& spec) {
  if (spec.ops.empty()) return "identity";
  std::string out;
  for (const auto& op : spec.ops) {
    if (!out.empty()) out += " + ";
    out += Describe(op);
  }
  return out + " [" + std::string(OrderName(spec.order)) + "]";
}

std::string_view OrderName(Order order) {
  return order == Order::kAfterDownscale ? "after_downscale" : "before_downscale";
}

std::vector<double> GaussianTaps(double sigma, int ksize) {
  if (!(sigma > 0.0)) throw InvalidArgument("blur sigma must be > 0");
  if (ksize < 1 || ksize % 2 == 0) {
    throw InvalidArgument("blur ksize must be odd and >= 1, got " + std::to_string(ksize));
  }
  const int r = ksize / 2;
  std::vector<double> taps(ksize);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    taps[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += taps[i + r];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

Raster GaussianBlur(const Raster& img, double sigma, int ksize) {
  const std::vector<double> taps = GaussianTaps(sigma, ksize);
  const int r = ksize / 2;
  const int h = img.height(), w = img.width(), ch = img.channels();
  auto in = img.samples();
  std::vector<double> tmp(img.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t) {
          const int xx = std::clamp(x + t, 0, w - 1);
          acc += taps[t + r] * in[(static_cast<std::size_t>(y) * w + xx) * ch + c];
        }
        tmp[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
      }
    }
  }
  std::vector<double> out(img.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t) {
          const int yy = std::clamp(y + t, 0, h - 1);
          acc += taps[t + r] * tmp[(static_cast<std::size_t>(yy) * w + x) * ch + c];
        }
        out[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
      }
    }
  }
  return Raster::Clipped(h, w, ch, std::move(out));
}

std::vector<double> NoiseField(std::size_t count, double sigma, const StreamKey& key) {
  std::vector<double> field(count, 0.0);
  if (sigma == 0.0) return field;
  std::mt19937_64 engine = key.Engine();
  std::normal_distribution<double> normal(0.0, sigma);
  for (double& v : field) v = normal(engine);
  return field;
}

Raster GaussianNoise(const Raster& img, double sigma, const StreamKey& key) {
  if (!(sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
  if (sigma == 0.0) return img;
  std::vector<double> out = NoiseField(img.size(), sigma, key);
  auto in = img.samples();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
  return Raster::Clipped(img.height(), img.width(), img.channels(), std::move(out));
}

Raster AdjustContrast(const Raster& img, double c) {
  if (!(c >= 0.0)) throw InvalidArgument("contrast factor must be >= 0");
  if (c == 1.0) return img;
  std::vector<double> out(img.size());
  auto in = img.samples();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 + c * (in[i] - 0.5);
  return Raster::Clipped(img.height(), img.width(), img.channels(), std::move(out));
}

std::array<double, 256> LuminanceHistogram(const Raster& img) {
  std::array<double, 256> hist{};
  const Raster luma = Luminance(img);
  for (double v : luma.samples()) hist[ToByte(v)] += 1.0;
  return hist;
}

std::vector<int> OtsuThresholdsExhaustive(const std::array<double, 256>& histogram, int n) {
  if (n != 1 && n != 2) {
    throw InvalidArgument("exhaustive otsu search supports n in {1, 2}");
  }
  const HistogramMoments m(histogram);
  std::vector<int> best;
  double best_score = -1.0;
  if (n == 1) {
    for (int t = 1; t <= 255; ++t) {
      const double score = m.ClassScore(0, t) + m.ClassScore(t, 256);
      if (score > best_score) {
        best_score = score;
        best = {t};
      }
    }
    return best;
  }
  for (int t1 = 1; t1 <= 254; ++t1) {
    const double first = m.ClassScore(0, t1);
    for (int t2 = t1 + 1; t2 <= 255; ++t2) {
      const double score = first + m.ClassScore(t1, t2) + m.ClassScore(t2, 256);
      if (score > best_score) {
        best_score = score;
        best = {t1, t2};
      }
    }
  }
  return best;
}

std::vector<int> OtsuThresholdsDp(const std::array<double, 256>& histogram, int n) {
  CheckOtsuCount(n);
  const HistogramMoments m(histogram);
  const int classes = n + 1;
  // best[k][j]: best score splitting bins [0, j) into k + 1 classes.
  std::vector<std::vector<double>> best(classes, std::vector<double>(257, -1.0));
  std::vector<std::vector<int>> arg(classes, std::vector<int>(257, 0));
  for (int j = 1; j <= 256; ++j) best[0][j] = m.ClassScore(0, j);
  for (int k = 1; k < classes; ++k) {
    for (int j = k + 1; j <= 256; ++j) {
      double top = -1.0;
      int top_i = k;
      for (int i = k; i < j; ++i) {
        const double score = best[k - 1][i] + m.ClassScore(i, j);
        if (score > top) {
          top = score;
          top_i = i;
        }
      }
      best[k][j] = top;
      arg[k][j] = top_i;
    }
  }
  std::vector<int> thresholds(n);
  int j = 256;
  for (int k = classes - 1; k >= 1; --k) {
    j = arg[k][j];
    thresholds[k - 1] = j;
  }
  return thresholds;
}

std::vector<int> OtsuThresholds(const std::array<double, 256>& histogram, int n) {
  CheckOtsuCount(n);
  if (n <= 2) return OtsuThresholdsExhaustive(histogram, n);
  return OtsuThresholdsDp(histogram, n);
}

Raster ApplyThresholds(const Raster& img, const std::vector<int>& thresholds) {
  const int n = static_cast<int>(thresholds.size());
  // Bin k spans [edge[k], edge[k+1]) in intensity; an 8-bit threshold t sits
  // halfway between codes t-1 and t.
  std::vector<double> edge(n + 2);
  edge[0] = 0.0;
  for (int k = 0; k < n; ++k) edge[k + 1] = (thresholds[k] - 0.5) / 255.0;
  edge[n + 1] = 1.0;
  std::vector<double> midpoint(n + 1);
  for (int k = 0; k <= n; ++k) midpoint[k] = 0.5 * (edge[k] + edge[k + 1]);

  std::vector<double> out(img.size());
  auto in = img.samples();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int code = ToByte(in[i]);
    const int bin = static_cast<int>(
        std::upper_bound(thresholds.begin(), thresholds.end(), code) - thresholds.begin());
    out[i] = midpoint[bin];
  }
  return Raster::Clipped(img.height(), img.width(), img.channels(), std::move(out));
}

Raster QuantizeOtsuImage(const Raster& img, int n_thresholds) {
  return ApplyThresholds(img, OtsuThresholds(LuminanceHistogram(img), n_thresholds));
}

Raster ApplyOp(const DegradationOp& op, const Raster& img, const StreamKey& key) {
  return std::visit(
      Overloaded{
          [&](const GaussBlur& b) { return GaussianBlur(img, b.sigma, b.ksize); },
          [&](const GaussNoise& n) {
            return GaussianNoise(img, n.sigma, n.seed_salt == 0 ? key : key.With(n.seed_salt));
          },
          [&](const Contrast& c) { return AdjustContrast(img, c.c); },
          [&](const QuantizeOtsu& q) { return QuantizeOtsuImage(img, q.n_thresholds); },
      },
      op);
}

Raster ApplyOps(const std::vector<DegradationOp>& ops, const Raster& img,
                const StreamKey& key) {
  Raster current = img;
  const StreamKey base = key.With("degrade");
  for (std::size_t k = 0; k < ops.size(); ++k) {
    current = ApplyOp(ops[k], current, base.With(static_cast<std::uint64_t>(k)));
  }
  return current;
}

Raster ApplySpec(const DegradationSpec& spec, const BaseDownscaler& base,
                 const Raster& img, const StreamKey& key) {
  Validate(spec);
  if (spec.order == Order::kAfterDownscale) {
    return ApplyOps(spec.ops, base(img), key);
  }
  return base(ApplyOps(spec.ops, img, key));
}

Raster SyntheticDownscaler::operator()(const Raster& img, const StreamKey& key) const {
  const resample::KernelKind kind = base;
  const int s = factor;
  return ApplySpec(
      spec, [kind, s](const Raster& x) { return resample::Downscale(x, s, kind); }, img,
      key);
}

}  // namespace idard::degrade
