#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "idard/image.h"
#include "idard/resample.h"
#include "idard/rng.h"

namespace idard {
class Backend;
}

namespace idard::upscale {

inline constexpr double kDefaultTau = 0.02;

// A blind stochastic upscaler: sample i of an LR raster is a pure function of
// (lr, i, key). It never sees which downscaler produced the LR input.
class Upscaler {
 public:
  // Deterministic interpolation; every sample index gives the same output.
  static Upscaler Interp(int factor, resample::KernelKind kernel);
  // clip(interp + tau * B_i), B_i a unit-variance field with no energy below
  // the LR Nyquist frequency (white noise minus its own s x s block mean).
  static Upscaler Perturbed(int factor, resample::KernelKind kernel,
                            double tau = kDefaultTau);
  // Samples come from an IDRD backend; `factor` must be declared by it.
  static Upscaler Remote(std::shared_ptr<Backend> backend, int factor);
  // first then second; factor is the product. An identity stage (interp at
  // factor 1) is elided.
  static Upscaler Chain(const Upscaler& first, const Upscaler& second);

  int factor() const { return factor_; }
  bool deterministic() const;
  std::string Describe() const;
  // Stage factors in application order (a single entry unless chained).
  std::vector<int> StageFactors() const;

  // i >= 1. Output dims are lr dims x factor.
  Raster Sample(const Raster& lr, int i, const StreamKey& key) const;
  // Samples 1..n; element i-1 equals Sample(lr, i, key). Remote backends
  // receive a single request.
  std::vector<Raster> Samples(const Raster& lr, int n, const StreamKey& key) const;

 private:
  struct InterpSpec {
    resample::KernelKind kernel;
  };
  struct PerturbedSpec {
    resample::KernelKind kernel;
    double tau;
  };
  struct RemoteSpec {
    std::shared_ptr<Backend> backend;
  };
  struct ChainSpec {
    std::shared_ptr<const Upscaler> first;
    std::shared_ptr<const Upscaler> second;
  };
  using Spec = std::variant<InterpSpec, PerturbedSpec, RemoteSpec, ChainSpec>;

  Upscaler(int factor, Spec spec) : factor_(factor), spec_(std::move(spec)) {}

  int factor_ = 1;
  Spec spec_;
};

// The high-frequency field added by the perturbed upscaler for sample i:
// h*s x w*s x c values with zero mean over every s x s block.
std::vector<double> HighPassField(int lr_height, int lr_width, int channels, int factor,
                                  const StreamKey& key);

}  // namespace idard::upscale
