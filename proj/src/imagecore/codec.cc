#include "idard/codec.h"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>

#include "idard/error.h"

namespace idard {
namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
  std::string error;
};

void PngReadFn(png_structp png, png_bytep out, png_size_t count) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->offset + count > state->bytes.size()) {
    state->error = "truncated PNG stream";
    png_error(png, "truncated");
  }
  std::memcpy(out, state->bytes.data() + state->offset, count);
  state->offset += count;
}

void PngErrorFn(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngReadState*>(png_get_error_ptr(png));
  if (state != nullptr && state->error.empty()) state->error = msg;
  png_longjmp(png, 1);
}

void PngWarningFn(png_structp, png_const_charp) {}

// libpng reports errors via longjmp, so everything mutated between setjmp and
// the jump lives behind a pointer fixed before setjmp.
struct PngDecodeScratch {
  PngReadState state;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int stored_channels = 0;
  bool unsupported_depth = false;
};

Raster DecodePng(std::span<const std::uint8_t> bytes) {
  auto scratch = std::make_unique<PngDecodeScratch>();
  PngDecodeScratch* const s = scratch.get();
  s->state.bytes = bytes;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &s->state,
                                           PngErrorFn, PngWarningFn);
  if (png == nullptr) throw DecodeError("libpng initialisation failed", 0);
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DecodeError("libpng initialisation failed", 0);
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError(s->state.error.empty() ? "malformed PNG" : s->state.error,
                      s->state.offset);
  }

  png_set_read_fn(png, &s->state, PngReadFn);
  png_read_info(png, info);
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(png, info, &s->width, &s->height, &bit_depth, &color_type,
               nullptr, nullptr, nullptr);
  if (bit_depth == 16) {
    s->unsupported_depth = true;
  } else {
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
      png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);
    s->stored_channels = png_get_channels(png, info);
    const png_size_t rowbytes = png_get_rowbytes(png, info);
    s->pixels.resize(rowbytes * s->height);
    s->rows.resize(s->height);
    for (png_uint_32 y = 0; y < s->height; ++y) {
      s->rows[y] = s->pixels.data() + y * rowbytes;
    }
    png_read_image(png, s->rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);

  if (s->unsupported_depth) throw UnsupportedFormat("16-bit PNG is not supported");
  const int stored = s->stored_channels;
  const int out_channels = stored >= 3 ? 3 : 1;
  if (stored == 2 || stored == 4) {
    std::cerr << "warning: dropping alpha channel from PNG input\n";
  }
  std::vector<double> samples(static_cast<std::size_t>(s->width) * s->height *
                              out_channels);
  std::size_t k = 0;
  for (png_uint_32 y = 0; y < s->height; ++y) {
    const std::uint8_t* row = s->rows[y];
    for (png_uint_32 x = 0; x < s->width; ++x) {
      for (int c = 0; c < out_channels; ++c) {
        samples[k++] = row[x * stored + c] / 255.0;
      }
    }
  }
  return Raster(static_cast<int>(s->height), static_cast<int>(s->width),
                out_channels, std::move(samples));
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string PpmToken(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    token.push_back(static_cast<char>(bytes[pos++]));
  }
  return token;
}

long PpmNumber(std::span<const std::uint8_t> bytes, std::size_t& pos,
               const char* what) {
  const std::size_t start = pos;
  std::string token = PpmToken(bytes, pos);
  if (token.empty() || token.size() > 9 ||
      !std::all_of(token.begin(), token.end(),
                   [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
    throw DecodeError(std::string("bad PPM ") + what, start);
  }
  return std::stol(token);
}

Raster DecodePpm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 2;
  const int channels = bytes[1] == '6' ? 3 : 1;
  const long width = PpmNumber(bytes, pos, "width");
  const long height = PpmNumber(bytes, pos, "height");
  const std::size_t maxval_offset = pos;
  const long maxval = PpmNumber(bytes, pos, "maxval");
  if (width < 1 || height < 1) throw DecodeError("PPM dims must be >= 1", 3);
  if (maxval > 255) throw UnsupportedFormat("PPM maxval > 255 (16-bit) is not supported");
  if (maxval != 255) {
    throw UnsupportedFormat("PPM maxval " + std::to_string(maxval) +
                            " is not supported (expected 255)");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw DecodeError("missing whitespace after PPM maxval", maxval_offset);
  }
  ++pos;
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - pos < count) {
    throw DecodeError("truncated PPM payload", bytes.size());
  }
  std::vector<double> samples(count);
  for (std::size_t i = 0; i < count; ++i) samples[i] = bytes[pos + i] / 255.0;
  return Raster(static_cast<int>(height), static_cast<int>(width), channels,
                std::move(samples));
}

struct PngWriteState {
  std::vector<std::uint8_t>* out;
};

void PngWriteFn(png_structp png, png_bytep data, png_size_t count) {
  auto* state = static_cast<PngWriteState*>(png_get_io_ptr(png));
  state->out->insert(state->out->end(), data, data + count);
}

void PngFlushFn(png_structp) {}

void PngWriteErrorFn(png_structp png, png_const_charp) { png_longjmp(png, 1); }

std::vector<std::uint8_t> EncodePng(const Raster& img) {
  std::vector<std::uint8_t> out;
  PngWriteState state{&out};
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            PngWriteErrorFn, PngWarningFn);
  if (png == nullptr) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> pixels(img.size());
  auto samples = img.samples();
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = ToByte(samples[i]);
  std::vector<png_bytep> rows(img.height());
  const std::size_t stride = static_cast<std::size_t>(img.width()) * img.channels();
  for (int y = 0; y < img.height(); ++y) rows[y] = pixels.data() + y * stride;

  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed");
  }
  png_set_write_fn(png, &state, PngWriteFn, PngFlushFn);
  png_set_IHDR(png, info, img.width(), img.height(), 8,
               img.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::vector<std::uint8_t> EncodePpm(const Raster& img) {
  // Single-channel rasters go out as the PGM sibling (P5).
  const std::string header = std::string(img.channels() == 3 ? "P6" : "P5") +
                             "\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.size());
  for (double v : img.samples()) out.push_back(ToByte(v));
  return out;
}

}  // namespace

Raster Decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 8 && std::equal(kPngSignature, kPngSignature + 8, bytes.begin())) {
    return DecodePng(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5')) {
    return DecodePpm(bytes);
  }
  throw DecodeError("unrecognised image signature (expected PNG or P6 PPM)", 0);
}

std::vector<std::uint8_t> Encode(const Raster& img, ImageFormat format) {
  return format == ImageFormat::kPng ? EncodePng(img) : EncodePpm(img);
}

ImageFormat FormatForPath(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  return (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") ? ImageFormat::kPpm
                                                           : ImageFormat::kPng;
}

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void WriteFileBytes(const std::filesystem::path& path,
                    std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Raster ReadImage(const std::filesystem::path& path) {
  auto bytes = ReadFileBytes(path);
  return Decode(bytes);
}

void WriteImage(const Raster& img, const std::filesystem::path& path) {
  WriteFileBytes(path, Encode(img, FormatForPath(path)));
}

}  // namespace idard
