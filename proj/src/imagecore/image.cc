#include "idard/image.h"

#include <cmath>

#include "idard/error.h"

namespace idard {
namespace {

void CheckDims(int height, int width, int channels, std::size_t count) {
  if (height < 1 || width < 1) {
    throw InvalidArgument("raster dims must be >= 1, got " +
                          std::to_string(height) + "x" + std::to_string(width));
  }
  if (channels != 1 && channels != 3) {
    throw InvalidArgument("raster channels must be 1 or 3, got " +
                          std::to_string(channels));
  }
  const std::size_t expected = static_cast<std::size_t>(height) *
                               static_cast<std::size_t>(width) *
                               static_cast<std::size_t>(channels);
  if (count != expected) {
    throw InvalidArgument("raster sample count " + std::to_string(count) +
                          " does not match " + std::to_string(expected));
  }
}

}  // namespace

Raster::Raster(int height, int width, int channels, std::vector<double> samples)
    : height_(height), width_(width), channels_(channels),
      samples_(std::move(samples)) {
  CheckDims(height, width, channels, samples_.size());
  for (double v : samples_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidArgument("raster sample outside [0,1]: " + std::to_string(v));
    }
  }
}

Raster Raster::Filled(int height, int width, int channels, double value) {
  CheckDims(height, width, channels,
            static_cast<std::size_t>(height) * width * channels);
  return Raster(height, width, channels,
                std::vector<double>(static_cast<std::size_t>(height) * width *
                                        channels,
                                    value));
}

Raster Raster::Clipped(int height, int width, int channels,
                       std::vector<double> samples) {
  for (double& v : samples) {
    if (std::isnan(v) || v < 0.0) {
      v = 0.0;
    } else if (v > 1.0) {
      v = 1.0;
    }
  }
  return Raster(height, width, channels, std::move(samples));
}

Raster Luminance(const Raster& img) {
  if (img.channels() == 1) return img;
  std::vector<double> out(img.pixel_count());
  auto in = img.samples();
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = kLumaR * in[3 * p] + kLumaG * in[3 * p + 1] + kLumaB * in[3 * p + 2];
  }
  return Raster::Clipped(img.height(), img.width(), 1, std::move(out));
}

Raster QuantizeTo8Bit(const Raster& img) {
  std::vector<double> out(img.size());
  auto in = img.samples();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ToByte(in[i]) / 255.0;
  return Raster(img.height(), img.width(), img.channels(), std::move(out));
}

}  // namespace idard
