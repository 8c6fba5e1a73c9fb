#include "idard/upscalers.h"

#include <cmath>
#include <random>
#include <sstream>

#include "idard/backend.h"
#include "idard/error.h"

namespace idard::upscale {
namespace {

void CheckSampleIndex(int i) {
  if (i < 1) throw InvalidArgument("sample index must be >= 1, got " + std::to_string(i));
}

StreamKey StageKey(const StreamKey& key, int stage) {
  return key.With("chain").With(static_cast<std::uint64_t>(stage));
}

}  // namespace

std::vector<double> HighPassField(int lr_height, int lr_width, int channels, int factor,
                                  const StreamKey& key) {
  const int s = factor;
  const int h = lr_height * s;
  const int w = lr_width * s;
  const std::size_t count = static_cast<std::size_t>(h) * w * channels;
  std::vector<double> field(count, 0.0);
  if (s == 1) return field;

  std::mt19937_64 engine = key.Engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : field) v = normal(engine);

  const double gain = s / std::sqrt(static_cast<double>(s) * s - 1.0);
  const double inv_area = 1.0 / (static_cast<double>(s) * s);
  for (int by = 0; by < lr_height; ++by) {
    for (int bx = 0; bx < lr_width; ++bx) {
      for (int c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (int y = by * s; y < (by + 1) * s; ++y) {
          for (int x = bx * s; x < (bx + 1) * s; ++x) {
            sum += field[(static_cast<std::size_t>(y) * w + x) * channels + c];
          }
        }
        const double mean = sum * inv_area;
        for (int y = by * s; y < (by + 1) * s; ++y) {
          for (int x = bx * s; x < (bx + 1) * s; ++x) {
            double& v = field[(static_cast<std::size_t>(y) * w + x) * channels + c];
            v = (v - mean) * gain;
          }
        }
      }
    }
  }
  return field;
}

Upscaler Upscaler::Interp(int factor, resample::KernelKind kernel) {
  if (factor < 1) throw InvalidScale("upscale factor must be >= 1");
  return Upscaler(factor, InterpSpec{kernel});
}

Upscaler Upscaler::Perturbed(int factor, resample::KernelKind kernel, double tau) {
  if (factor < 1) throw InvalidScale("upscale factor must be >= 1");
  if (!(tau >= 0.0) || !std::isfinite(tau)) {
    throw InvalidArgument("perturbation amplitude tau must be finite and >= 0");
  }
  return Upscaler(factor, PerturbedSpec{kernel, tau});
}

Upscaler Upscaler::Remote(std::shared_ptr<Backend> backend, int factor) {
  if (!backend) throw InvalidArgument("remote upscaler needs a backend");
  if (factor < 1) throw InvalidScale("upscale factor must be >= 1");
  return Upscaler(factor, RemoteSpec{std::move(backend)});
}

Upscaler Upscaler::Chain(const Upscaler& first, const Upscaler& second) {
  auto is_identity = [](const Upscaler& u) {
    return u.factor_ == 1 && std::holds_alternative<InterpSpec>(u.spec_);
  };
  if (is_identity(first)) return second;
  if (is_identity(second)) return first;
  return Upscaler(first.factor_ * second.factor_,
                  ChainSpec{std::make_shared<const Upscaler>(first),
                            std::make_shared<const Upscaler>(second)});
}

bool Upscaler::deterministic() const {
  if (std::holds_alternative<InterpSpec>(spec_)) return true;
  if (const auto* p = std::get_if<PerturbedSpec>(&spec_)) return p->tau == 0.0 || factor_ == 1;
  if (const auto* c = std::get_if<ChainSpec>(&spec_)) {
    return c->first->deterministic() && c->second->deterministic();
  }
  return false;
}

std::string Upscaler::Describe() const {
  std::ostringstream out;
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, InterpSpec>) {
          out << "interp(" << resample::KernelName(spec.kernel) << ", x" << factor_ << ")";
        } else if constexpr (std::is_same_v<T, PerturbedSpec>) {
          out << "perturbed(" << resample::KernelName(spec.kernel) << ", tau=" << spec.tau
              << ", x" << factor_ << ")";
        } else if constexpr (std::is_same_v<T, RemoteSpec>) {
          out << "remote(" << spec.backend->endpoint() << ", x" << factor_ << ")";
        } else {
          out << "chain(" << spec.first->Describe() << ", " << spec.second->Describe() << ")";
        }
      },
      spec_);
  return out.str();
}

std::vector<int> Upscaler::StageFactors() const {
  if (const auto* c = std::get_if<ChainSpec>(&spec_)) {
    std::vector<int> out = c->first->StageFactors();
    for (int f : c->second->StageFactors()) out.push_back(f);
    return out;
  }
  return {factor_};
}

Raster Upscaler::Sample(const Raster& lr, int i, const StreamKey& key) const {
  CheckSampleIndex(i);
  return std::visit(
      [&](const auto& spec) -> Raster {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, InterpSpec>) {
          return resample::Upscale(lr, factor_, spec.kernel);
        } else if constexpr (std::is_same_v<T, PerturbedSpec>) {
          Raster base = resample::Upscale(lr, factor_, spec.kernel);
          if (spec.tau == 0.0 || factor_ == 1) return base;
          const std::vector<double> field =
              HighPassField(lr.height(), lr.width(), lr.channels(), factor_,
                            key.With("perturb").With(static_cast<std::uint64_t>(i)));
          std::vector<double> out(base.samples().begin(), base.samples().end());
          for (std::size_t k = 0; k < out.size(); ++k) out[k] += spec.tau * field[k];
          return Raster::Clipped(base.height(), base.width(), base.channels(), std::move(out));
        } else if constexpr (std::is_same_v<T, RemoteSpec>) {
          // Sample i is the last of an i-sample request.
          std::vector<Raster> batch =
              spec.backend->Upscale(lr, factor_, i, key.wire_seed(), key.image_id());
          return std::move(batch.back());
        } else {
          const Raster mid = spec.first->Sample(lr, i, StageKey(key, 0));
          return spec.second->Sample(mid, i, StageKey(key, 1));
        }
      },
      spec_);
}

std::vector<Raster> Upscaler::Samples(const Raster& lr, int n, const StreamKey& key) const {
  if (n < 1) throw InvalidArgument("number of samples must be >= 1");
  if (const auto* remote = std::get_if<RemoteSpec>(&spec_)) {
    return remote->backend->Upscale(lr, factor_, n, key.wire_seed(), key.image_id());
  }
  if (const auto* chain = std::get_if<ChainSpec>(&spec_)) {
    std::vector<Raster> mids = chain->first->Samples(lr, n, StageKey(key, 0));
    std::vector<Raster> out;
    out.reserve(mids.size());
    for (int i = 1; i <= n; ++i) {
      out.push_back(chain->second->Sample(mids[i - 1], i, StageKey(key, 1)));
    }
    return out;
  }
  std::vector<Raster> out;
  out.reserve(n);
  if (deterministic()) {
    out.push_back(Sample(lr, 1, key));
    for (int i = 2; i <= n; ++i) out.push_back(out.front());
    return out;
  }
  for (int i = 1; i <= n; ++i) out.push_back(Sample(lr, i, key));
  return out;
}

}  // namespace idard::upscale
