#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "idard/image.h"

namespace idard {

enum class ImageFormat { kPng, kPpm };

// Decodes a PNG or binary PPM (P6) stream; the format is sniffed from the
// leading bytes. Alpha channels are dropped (with a warning on stderr).
// 16-bit streams raise UnsupportedFormat.
Raster Decode(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> Encode(const Raster& img, ImageFormat format);

// Chooses the format from the file extension (.ppm -> PPM, otherwise PNG).
ImageFormat FormatForPath(const std::filesystem::path& path);

Raster ReadImage(const std::filesystem::path& path);
void WriteImage(const Raster& img, const std::filesystem::path& path);

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path,
                    std::span<const std::uint8_t> bytes);

}  // namespace idard
