#include <png.h>

#include <gtest/gtest.h>

#include <cstring>
#include <string>

#include "idard/codec.h"
#include "idard/error.h"
#include "idard/image.h"
#include "test_util.h"

namespace idard {
namespace {

using testing::RandomByteRaster;
using testing::ScratchDir;

// Raw libpng writer so the tests can produce layouts the encoder never emits
// (alpha, 16-bit).
std::vector<std::uint8_t> RawPng(int w, int h, int color_type, int depth,
                                 const std::vector<std::uint8_t>& pixels) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        auto* v = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
        v->insert(v->end(), data, data + n);
      },
      nullptr);
  png_set_IHDR(png, info, w, h, depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowbytes = pixels.size() / h;
  for (int y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * rowbytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

TEST(Raster, RejectsBadDims) {
  EXPECT_THROW(Raster(0, 4, 1, {}), InvalidArgument);
  EXPECT_THROW(Raster(2, 2, 2, std::vector<double>(8, 0.5)), InvalidArgument);
  EXPECT_THROW(Raster(2, 2, 1, std::vector<double>(3, 0.5)), InvalidArgument);
}

TEST(Raster, RejectsOutOfRangeSamples) {
  EXPECT_THROW(Raster(1, 2, 1, {0.5, 1.5}), InvalidArgument);
  EXPECT_THROW(Raster(1, 2, 1, {-0.01, 0.5}), InvalidArgument);
  EXPECT_THROW(Raster(1, 1, 1, {std::nan("")}), InvalidArgument);
}

TEST(Raster, ClippedClampsAndZeroesNan) {
  const Raster r = Raster::Clipped(1, 4, 1, {-1.0, 0.25, 2.0, std::nan("")});
  EXPECT_EQ(r.samples()[0], 0.0);
  EXPECT_EQ(r.samples()[1], 0.25);
  EXPECT_EQ(r.samples()[2], 1.0);
  EXPECT_EQ(r.samples()[3], 0.0);
}

TEST(Raster, InterleavedIndexing) {
  const Raster r(1, 2, 3, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  EXPECT_DOUBLE_EQ(r.at(0, 1, 0), 0.4);
  EXPECT_DOUBLE_EQ(r.at(0, 0, 2), 0.3);
}

TEST(Raster, LuminanceWeights) {
  const Raster r(1, 1, 3, {1.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(Luminance(r).samples()[0], kLumaR);
  const Raster g(1, 1, 3, {0.2, 0.4, 0.6});
  EXPECT_NEAR(Luminance(g).samples()[0], 0.299 * 0.2 + 0.587 * 0.4 + 0.114 * 0.6, 1e-15);
  const Raster gray(1, 2, 1, {0.3, 0.7});
  EXPECT_EQ(Luminance(gray), gray);
}

TEST(Raster, ToByteRounds) {
  EXPECT_EQ(ToByte(0.0), 0);
  EXPECT_EQ(ToByte(1.0), 255);
  EXPECT_EQ(ToByte(0.5), 128);
  EXPECT_EQ(ToByte(127.49 / 255.0), 127);
}

TEST(Codec, PngRoundTripIsExactOnByteGrid) {
  for (int c : {1, 3}) {
    const Raster img = RandomByteRaster(7, 5, c, 11 + c);
    EXPECT_EQ(Decode(Encode(img, ImageFormat::kPng)), img);
  }
}

TEST(Codec, PpmRoundTripIsExactOnByteGrid) {
  for (int c : {1, 3}) {
    const Raster img = RandomByteRaster(4, 9, c, 3 + c);
    EXPECT_EQ(Decode(Encode(img, ImageFormat::kPpm)), img);
  }
}

TEST(Codec, QuantizeMatchesEncodeDecode) {
  const Raster img = testing::RandomRaster(6, 6, 3, 5);
  EXPECT_EQ(Decode(Encode(img, ImageFormat::kPng)), QuantizeTo8Bit(img));
}

TEST(Codec, PpmWithComments) {
  const std::string text = "P6\n# a comment\n2 1\n# more\n255\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  for (int v : {0, 255, 0, 255, 255, 255}) bytes.push_back(static_cast<std::uint8_t>(v));
  const Raster r = Decode(bytes);
  EXPECT_EQ(r.width(), 2);
  EXPECT_EQ(r.height(), 1);
  EXPECT_EQ(r.channels(), 3);
  EXPECT_EQ(r.at(0, 0, 1), 1.0);
}

TEST(Codec, TruncatedPpmIsDecodeError) {
  const std::string text = "P6\n4 4\n255\nabc";
  EXPECT_THROW(Decode(std::vector<std::uint8_t>(text.begin(), text.end())), DecodeError);
}

TEST(Codec, SixteenBitPpmIsUnsupported) {
  const std::string text = "P6\n1 1\n65535\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  bytes.resize(bytes.size() + 6, 0);
  EXPECT_THROW(Decode(bytes), UnsupportedFormat);
}

TEST(Codec, SixteenBitPngIsUnsupported) {
  const auto bytes = RawPng(2, 2, PNG_COLOR_TYPE_GRAY, 16, std::vector<std::uint8_t>(8, 0x80));
  EXPECT_THROW(Decode(bytes), UnsupportedFormat);
}

TEST(Codec, AlphaIsDropped) {
  const std::vector<std::uint8_t> px = {255, 0, 0, 10, 0, 255, 0, 200};
  const Raster r = Decode(RawPng(2, 1, PNG_COLOR_TYPE_RGBA, 8, px));
  EXPECT_EQ(r.channels(), 3);
  EXPECT_EQ(r.at(0, 0, 0), 1.0);
  EXPECT_EQ(r.at(0, 1, 1), 1.0);
}

TEST(Codec, GrayAlphaBecomesGray) {
  const Raster r = Decode(RawPng(1, 1, PNG_COLOR_TYPE_GRAY_ALPHA, 8, {51, 0}));
  EXPECT_EQ(r.channels(), 1);
  EXPECT_DOUBLE_EQ(r.samples()[0], 51 / 255.0);
}

TEST(Codec, CorruptPngIsDecodeError) {
  auto bytes = Encode(RandomByteRaster(8, 8, 3, 1), ImageFormat::kPng);
  bytes.resize(bytes.size() / 2);
  EXPECT_THROW(Decode(bytes), DecodeError);
  EXPECT_THROW(Decode(std::vector<std::uint8_t>{'G', 'I', 'F', '8'}), DecodeError);
}

TEST(Codec, FileRoundTrip) {
  ScratchDir dir;
  const Raster img = RandomByteRaster(3, 4, 3, 9);
  WriteImage(img, dir / "a.png");
  WriteImage(img, dir / "a.ppm");
  EXPECT_EQ(ReadImage(dir / "a.png"), img);
  EXPECT_EQ(ReadImage(dir / "a.ppm"), img);
  EXPECT_THROW(ReadImage(dir / "missing.png"), IoError);
}

}  // namespace
}  // namespace idard
