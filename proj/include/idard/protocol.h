#pragma once

// IDRD framed wire protocol spoken between the harness and external
// super-resolution / metric backends.
//
// Frame (all integers little-endian):
//   magic "IDRD" (4) | version u16 | kind u16 | payload length u32 | payload
//
// Raster payload:
//   height u32 | width u32 | channels u8 | height*width*channels f32 samples
//   (row-major, channels interleaved)
//
// Payloads per kind:
//   HELLO        str16 mode | u16 n, n x u16 factors | u16 n, n x str16 metric
//                kinds | u16 n, n x str16 tags | str32 metadata (free-form)
//   UPSCALE_REQ  raster | factor u16 | n_samples u16 | seed u64 | str16 image id
//   UPSCALE_RESP raster (one frame per sample, i = 1..n_samples in order;
//                sample i must depend only on (lr, factor, seed, image id, i))
//   METRIC_REQ   str16 metric kind | raster a | raster b
//   METRIC_RESP  f64 value
//   ERROR        UTF-8 message (entire payload)
//
// strN = uN byte length followed by UTF-8 bytes.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "idard/image.h"

namespace idard::protocol {

inline constexpr std::uint8_t kMagic[4] = {'I', 'D', 'R', 'D'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 12;
inline constexpr std::uint32_t kMaxPayload = 1u << 28;

enum class FrameKind : std::uint16_t {
  kHello = 1,
  kUpscaleReq = 2,
  kUpscaleResp = 3,
  kMetricReq = 4,
  kMetricResp = 5,
  kError = 6,
};

std::string_view FrameKindName(FrameKind kind);

struct Frame {
  FrameKind kind = FrameKind::kHello;
  std::vector<std::uint8_t> payload;
};

struct FrameHeader {
  FrameKind kind;
  std::uint32_t length;
};

// Validates magic, version, kind and length bound; throws ProtocolError.
FrameHeader ParseHeader(std::span<const std::uint8_t, kHeaderSize> header);

std::vector<std::uint8_t> EncodeFrame(const Frame& frame);

// Decodes exactly one whole frame occupying all of `bytes`.
Frame DecodeFrame(std::span<const std::uint8_t> bytes);

struct Hello {
  std::string mode;
  std::vector<std::uint16_t> factors;
  std::vector<std::string> metric_kinds;
  std::vector<std::string> tags;
  std::string metadata;

  friend bool operator==(const Hello&, const Hello&) = default;
};

struct UpscaleRequest {
  Raster lr;
  std::uint16_t factor = 0;
  std::uint16_t n_samples = 0;
  std::uint64_t seed = 0;
  std::string image_id;
};

struct MetricRequest {
  std::string kind;
  Raster a;
  Raster b;
};

std::vector<std::uint8_t> EncodeHello(const Hello& hello);
Hello DecodeHello(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> EncodeRaster(const Raster& raster);
Raster DecodeRaster(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> EncodeUpscaleRequest(const UpscaleRequest& req);
UpscaleRequest DecodeUpscaleRequest(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> EncodeMetricRequest(const MetricRequest& req);
MetricRequest DecodeMetricRequest(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> EncodeMetricResponse(double value);
double DecodeMetricResponse(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> EncodeErrorMessage(std::string_view message);
std::string DecodeErrorMessage(std::span<const std::uint8_t> payload);

}  // namespace idard::protocol
