#include "idard/protocol.h"

#include <bit>
#include <cmath>
#include <cstring>

#include "idard/error.h"

namespace idard::protocol {
namespace {

static_assert(std::endian::native == std::endian::little,
              "wire encoding assumes a little-endian host");

class ByteWriter {
 public:
  void U8(std::uint8_t v) { out_.push_back(v); }
  void U16(std::uint16_t v) { Raw(&v, sizeof v); }
  void U32(std::uint32_t v) { Raw(&v, sizeof v); }
  void U64(std::uint64_t v) { Raw(&v, sizeof v); }
  void F32(float v) { Raw(&v, sizeof v); }
  void F64(double v) { Raw(&v, sizeof v); }
  void Bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  void Str16(std::string_view s) {
    if (s.size() > 0xffff) throw InvalidArgument("string too long for str16 field");
    U16(static_cast<std::uint16_t>(s.size()));
    Raw(s.data(), s.size());
  }
  void Str32(std::string_view s) {
    U32(static_cast<std::uint32_t>(s.size()));
    Raw(s.data(), s.size());
  }

  std::vector<std::uint8_t> Take() { return std::move(out_); }

 private:
  void Raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> out_;
};

// Bounds-checked cursor; every overrun is a ProtocolError.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string_view what)
      : bytes_(bytes), what_(what) {}

  std::uint8_t U8() { return Fixed<std::uint8_t>(); }
  std::uint16_t U16() { return Fixed<std::uint16_t>(); }
  std::uint32_t U32() { return Fixed<std::uint32_t>(); }
  std::uint64_t U64() { return Fixed<std::uint64_t>(); }
  float F32() { return Fixed<float>(); }
  double F64() { return Fixed<double>(); }

  std::string Str16() { return Str(U16()); }
  std::string Str32() { return Str(U32()); }

  std::span<const std::uint8_t> Take(std::size_t n) {
    Need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void ExpectEnd() const {
    if (pos_ != bytes_.size()) {
      throw ProtocolError(std::string(what_) + ": " + std::to_string(remaining()) +
                          " trailing bytes");
    }
  }

 private:
  template <class T>
  T Fixed() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string Str(std::size_t n) {
    auto s = Take(n);
    return std::string(s.begin(), s.end());
  }

  void Need(std::size_t n) const {
    if (n > remaining()) {
      throw ProtocolError(std::string(what_) + ": payload truncated (need " +
                          std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                          ", have " + std::to_string(remaining()) + ")");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string_view what_;
};

void WriteRaster(ByteWriter& w, const Raster& r) {
  w.U32(static_cast<std::uint32_t>(r.height()));
  w.U32(static_cast<std::uint32_t>(r.width()));
  w.U8(static_cast<std::uint8_t>(r.channels()));
  for (double v : r.samples()) w.F32(static_cast<float>(v));
}

Raster ReadRaster(ByteReader& r) {
  const std::uint32_t h = r.U32();
  const std::uint32_t w = r.U32();
  const std::uint8_t c = r.U8();
  if (h == 0 || w == 0 || h > (1u << 20) || w > (1u << 20)) {
    throw ProtocolError("raster dims out of range: " + std::to_string(h) + "x" +
                        std::to_string(w));
  }
  if (c != 1 && c != 3) {
    throw ProtocolError("raster channel count must be 1 or 3, got " + std::to_string(c));
  }
  const std::uint64_t count = std::uint64_t{h} * w * c;
  if (count * 4 > r.remaining()) {
    throw ProtocolError("raster payload truncated: need " + std::to_string(count * 4) +
                        " sample bytes, have " + std::to_string(r.remaining()));
  }
  std::vector<double> samples(count);
  for (auto& s : samples) {
    const float v = r.F32();
    if (!std::isfinite(v)) throw ProtocolError("non-finite raster sample");
    s = v;
  }
  return Raster::Clipped(static_cast<int>(h), static_cast<int>(w), c, std::move(samples));
}

}  // namespace

std::string_view FrameKindName(FrameKind kind) {
  switch (kind) {
    case FrameKind::kHello: return "HELLO";
    case FrameKind::kUpscaleReq: return "UPSCALE_REQ";
    case FrameKind::kUpscaleResp: return "UPSCALE_RESP";
    case FrameKind::kMetricReq: return "METRIC_REQ";
    case FrameKind::kMetricResp: return "METRIC_RESP";
    case FrameKind::kError: return "ERROR";
  }
  return "UNKNOWN";
}

FrameHeader ParseHeader(std::span<const std::uint8_t, kHeaderSize> header) {
  if (std::memcmp(header.data(), kMagic, 4) != 0) throw ProtocolError("bad frame magic");
  ByteReader r(std::span<const std::uint8_t>(header).subspan(4), "frame header");
  const std::uint16_t version = r.U16();
  if (version != kVersion) {
    throw ProtocolError("unsupported protocol version " + std::to_string(version));
  }
  const std::uint16_t kind = r.U16();
  if (kind < 1 || kind > 6) throw ProtocolError("unknown frame kind " + std::to_string(kind));
  const std::uint32_t length = r.U32();
  if (length > kMaxPayload) {
    throw ProtocolError("frame length " + std::to_string(length) + " exceeds limit");
  }
  return {static_cast<FrameKind>(kind), length};
}

std::vector<std::uint8_t> EncodeFrame(const Frame& frame) {
  ByteWriter w;
  w.Bytes(kMagic);
  w.U16(kVersion);
  w.U16(static_cast<std::uint16_t>(frame.kind));
  w.U32(static_cast<std::uint32_t>(frame.payload.size()));
  w.Bytes(frame.payload);
  return w.Take();
}

Frame DecodeFrame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw ProtocolError("frame shorter than header");
  const FrameHeader h = ParseHeader(bytes.first<kHeaderSize>());
  if (bytes.size() - kHeaderSize != h.length) {
    throw ProtocolError("frame length field " + std::to_string(h.length) +
                        " does not match payload size " +
                        std::to_string(bytes.size() - kHeaderSize));
  }
  auto payload = bytes.subspan(kHeaderSize);
  return {h.kind, std::vector<std::uint8_t>(payload.begin(), payload.end())};
}

std::vector<std::uint8_t> EncodeHello(const Hello& hello) {
  ByteWriter w;
  w.Str16(hello.mode);
  w.U16(static_cast<std::uint16_t>(hello.factors.size()));
  for (auto f : hello.factors) w.U16(f);
  w.U16(static_cast<std::uint16_t>(hello.metric_kinds.size()));
  for (const auto& m : hello.metric_kinds) w.Str16(m);
  w.U16(static_cast<std::uint16_t>(hello.tags.size()));
  for (const auto& t : hello.tags) w.Str16(t);
  w.Str32(hello.metadata);
  return w.Take();
}

Hello DecodeHello(std::span<const std::uint8_t> payload) {
  ByteReader r(payload, "HELLO");
  Hello h;
  h.mode = r.Str16();
  const std::uint16_t nf = r.U16();
  for (int i = 0; i < nf; ++i) h.factors.push_back(r.U16());
  const std::uint16_t nm = r.U16();
  for (int i = 0; i < nm; ++i) h.metric_kinds.push_back(r.Str16());
  const std::uint16_t nt = r.U16();
  for (int i = 0; i < nt; ++i) h.tags.push_back(r.Str16());
  h.metadata = r.Str32();
  r.ExpectEnd();
  return h;
}

std::vector<std::uint8_t> EncodeRaster(const Raster& raster) {
  ByteWriter w;
  WriteRaster(w, raster);
  return w.Take();
}

Raster DecodeRaster(std::span<const std::uint8_t> payload) {
  ByteReader r(payload, "raster");
  Raster out = ReadRaster(r);
  r.ExpectEnd();
  return out;
}

std::vector<std::uint8_t> EncodeUpscaleRequest(const UpscaleRequest& req) {
  ByteWriter w;
  WriteRaster(w, req.lr);
  w.U16(req.factor);
  w.U16(req.n_samples);
  w.U64(req.seed);
  w.Str16(req.image_id);
  return w.Take();
}

UpscaleRequest DecodeUpscaleRequest(std::span<const std::uint8_t> payload) {
  ByteReader r(payload, "UPSCALE_REQ");
  UpscaleRequest req;
  req.lr = ReadRaster(r);
  req.factor = r.U16();
  req.n_samples = r.U16();
  req.seed = r.U64();
  req.image_id = r.Str16();
  r.ExpectEnd();
  return req;
}

std::vector<std::uint8_t> EncodeMetricRequest(const MetricRequest& req) {
  ByteWriter w;
  w.Str16(req.kind);
  WriteRaster(w, req.a);
  WriteRaster(w, req.b);
  return w.Take();
}

MetricRequest DecodeMetricRequest(std::span<const std::uint8_t> payload) {
  ByteReader r(payload, "METRIC_REQ");
  MetricRequest req;
  req.kind = r.Str16();
  req.a = ReadRaster(r);
  req.b = ReadRaster(r);
  r.ExpectEnd();
  return req;
}

std::vector<std::uint8_t> EncodeMetricResponse(double value) {
  ByteWriter w;
  w.F64(value);
  return w.Take();
}

double DecodeMetricResponse(std::span<const std::uint8_t> payload) {
  ByteReader r(payload, "METRIC_RESP");
  const double v = r.F64();
  r.ExpectEnd();
  if (!std::isfinite(v)) throw ProtocolError("non-finite METRIC_RESP value");
  return v;
}

std::vector<std::uint8_t> EncodeErrorMessage(std::string_view message) {
  return std::vector<std::uint8_t>(message.begin(), message.end());
}

std::string DecodeErrorMessage(std::span<const std::uint8_t> payload) {
  return std::string(payload.begin(), payload.end());
}

}  // namespace idard::protocol
