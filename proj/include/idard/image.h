#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace idard {

// An in-memory image with interleaved (row-major, then channel) samples in
// [0, 1]. Immutable after construction.
class Raster {
 public:
  Raster() = default;

  // Throws InvalidArgument if dims are invalid, the sample count does not
  // match, or any sample lies outside [0, 1].
  Raster(int height, int width, int channels, std::vector<double> samples);

  static Raster Filled(int height, int width, int channels, double value);

  // Clamps every sample into [0, 1]; NaN maps to 0.
  static Raster Clipped(int height, int width, int channels,
                        std::vector<double> samples);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  double at(int y, int x, int c) const {
    return samples_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::span<const double> samples() const { return samples_; }

  bool SameShape(const Raster& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const Raster& a, const Raster& b) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> samples_;
};

// Stable identifier of an image within one run (path or manifest key).
struct ImageId {
  std::string value;

  friend auto operator<=>(const ImageId&, const ImageId&) = default;
};

// Rec. 601 luma; identity copy for single-channel input.
Raster Luminance(const Raster& img);

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

// Round-to-nearest 8-bit code of an intensity in [0, 1].
inline std::uint8_t ToByte(double v) {
  double scaled = v * 255.0 + 0.5;
  if (scaled < 0.0) scaled = 0.0;
  if (scaled > 255.0) scaled = 255.0;
  return static_cast<std::uint8_t>(scaled);
}

// Snaps every sample onto the 8-bit grid (what an 8-bit file would store).
Raster QuantizeTo8Bit(const Raster& img);

}  // namespace idard
