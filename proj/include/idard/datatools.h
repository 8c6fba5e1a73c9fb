#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "idard/image.h"

namespace idard::data {

inline constexpr int kAgeGroups = 4;     // minor, youth, middle_aged, senior
inline constexpr int kEthnicities = 3;   // asian, white, black
inline constexpr int kGenders = 2;       // male, female
inline constexpr int kCells = kAgeGroups * kEthnicities * kGenders;

std::string_view AgeName(int age);
std::string_view EthnicityName(int ethnicity);
std::string_view GenderName(int gender);
// Accepts full names or the short codes (MI/Y/MA/S, A/W/B, M/F), any case.
std::optional<int> ParseAge(std::string_view text);
std::optional<int> ParseEthnicity(std::string_view text);
std::optional<int> ParseGender(std::string_view text);

struct ManifestRow {
  std::string id;
  std::string path;  // as written; relative paths resolve against the manifest dir
  std::optional<int> age;
  std::optional<int> ethnicity;
  std::optional<int> gender;

  bool labeled() const { return age && ethnicity && gender; }
  // age * 6 + ethnicity * 2 + gender; requires labeled().
  int cell() const { return (*age * kEthnicities + *ethnicity) * kGenders + *gender; }
};

struct Manifest {
  std::vector<ManifestRow> rows;
  std::filesystem::path base_dir;

  std::filesystem::path Resolve(const ManifestRow& row) const;
};

// CSV with header id,path[,age,ethnicity,gender]. Empty label cells are
// absent labels. Throws ConfigError on bad headers, unknown labels or
// duplicate ids.
Manifest ParseManifest(std::string_view text, const std::filesystem::path& base_dir = {});
Manifest ReadManifest(const std::filesystem::path& path);
std::string FormatManifest(const Manifest& manifest);
void WriteManifest(const Manifest& manifest, const std::filesystem::path& path);

using CellTable = std::array<std::int64_t, kCells>;

// Counts labeled rows per cell; unlabeled rows are ignored.
CellTable CountCells(const Manifest& manifest);

// Shannon entropy in bits over nonzero cells. Throws InvalidArgument when the
// table is empty.
double JointEntropy(const CellTable& cells);

struct BalanceResult {
  Manifest subset;
  CellTable available{};
  CellTable quota{};     // floor(n/24) plus remainder to the largest cells
  CellTable selected{};  // after deficit spill
  std::int64_t spilled = 0;  // quota that exhausted cells passed on
};

// Picks n rows spread as evenly as possible over the 24 cells. Within a cell
// rows are chosen by a seeded shuffle. Rows keep their manifest order.
// Throws InvalidArgument listing unlabeled ids, or when n exceeds the
// manifest size.
BalanceResult BalanceSubset(const Manifest& manifest, std::int64_t n, std::uint64_t seed);

// Deterministic synthetic photograph-like image: smooth illumination,
// 1/f-style value noise, soft-edged shapes and oriented texture patches.
Raster MakeProbeImage(int size, std::uint64_t seed, int index);

// Writes `count` probes as probe_NNN.png plus manifest.csv into `dir`.
Manifest WriteProbeSet(const std::filesystem::path& dir, int count, int size,
                       std::uint64_t seed);

}  // namespace idard::data
