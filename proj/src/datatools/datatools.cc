#include "idard/datatools.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "idard/codec.h"
#include "idard/error.h"
#include "idard/rng.h"

namespace idard::data {
namespace {

constexpr std::string_view kAgeNames[] = {"minor", "youth", "middle_aged", "senior"};
constexpr std::string_view kAgeCodes[] = {"mi", "y", "ma", "s"};
constexpr std::string_view kEthnicityNames[] = {"asian", "white", "black"};
constexpr std::string_view kEthnicityCodes[] = {"a", "w", "b"};
constexpr std::string_view kGenderNames[] = {"male", "female"};
constexpr std::string_view kGenderCodes[] = {"m", "f"};

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::string Trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <std::size_t N>
std::optional<int> Lookup(std::string_view text, const std::string_view (&names)[N],
                          const std::string_view (&codes)[N]) {
  const std::string key = Lower(Trim(text));
  for (std::size_t i = 0; i < N; ++i) {
    if (key == names[i] || key == codes[i]) return static_cast<int>(i);
  }
  return std::nullopt;
}

// Splits one CSV record; double quotes protect commas and "" is a literal quote.
std::vector<std::string> SplitCsvLine(std::string_view line, int line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(Trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw ConfigError("manifest line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(Trim(cur));
  return fields;
}

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string_view AgeName(int age) { return kAgeNames[age]; }
std::string_view EthnicityName(int ethnicity) { return kEthnicityNames[ethnicity]; }
std::string_view GenderName(int gender) { return kGenderNames[gender]; }

std::optional<int> ParseAge(std::string_view text) {
  return Lookup(text, kAgeNames, kAgeCodes);
}
std::optional<int> ParseEthnicity(std::string_view text) {
  return Lookup(text, kEthnicityNames, kEthnicityCodes);
}
std::optional<int> ParseGender(std::string_view text) {
  return Lookup(text, kGenderNames, kGenderCodes);
}

std::filesystem::path Manifest::Resolve(const ManifestRow& row) const {
  std::filesystem::path p(row.path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

Manifest ParseManifest(std::string_view text, const std::filesystem::path& base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  int col_id = -1, col_path = -1, col_age = -1, col_eth = -1, col_gender = -1;
  std::size_t n_cols = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    std::vector<std::string> f = SplitCsvLine(line, line_no);
    if (col_id < 0) {
      for (std::size_t i = 0; i < f.size(); ++i) {
        const std::string name = Lower(f[i]);
        const int idx = static_cast<int>(i);
        if (name == "id") col_id = idx;
        else if (name == "path") col_path = idx;
        else if (name == "age") col_age = idx;
        else if (name == "ethnicity") col_eth = idx;
        else if (name == "gender") col_gender = idx;
        else throw ConfigError("manifest header has unknown column '" + f[i] + "'");
      }
      if (col_id < 0 || col_path < 0) {
        throw ConfigError("manifest header must contain id and path columns");
      }
      n_cols = f.size();
      continue;
    }
    if (f.size() != n_cols) {
      throw ConfigError("manifest line " + std::to_string(line_no) + " has " +
                        std::to_string(f.size()) + " fields, expected " +
                        std::to_string(n_cols));
    }
    ManifestRow row;
    row.id = f[col_id];
    row.path = f[col_path];
    if (row.id.empty()) throw ConfigError("manifest line " + std::to_string(line_no) + ": empty id");
    if (!seen.insert(row.id).second) throw ConfigError("duplicate manifest id '" + row.id + "'");
    auto label = [&](int col, auto parse, std::string_view what) -> std::optional<int> {
      if (col < 0 || f[col].empty()) return std::nullopt;
      auto v = parse(f[col]);
      if (!v) {
        throw ConfigError("manifest line " + std::to_string(line_no) + ": unknown " +
                          std::string(what) + " label '" + f[col] + "'");
      }
      return v;
    };
    row.age = label(col_age, ParseAge, "age");
    row.ethnicity = label(col_eth, ParseEthnicity, "ethnicity");
    row.gender = label(col_gender, ParseGender, "gender");
    m.rows.push_back(std::move(row));
  }
  if (col_id < 0) throw ConfigError("manifest is empty (missing header)");
  return m;
}

Manifest ReadManifest(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = ReadFileBytes(path);
  return ParseManifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                       path.parent_path());
}

std::string FormatManifest(const Manifest& manifest) {
  std::string out = "id,path,age,ethnicity,gender\n";
  for (const ManifestRow& r : manifest.rows) {
    out += CsvField(r.id) + "," + CsvField(r.path) + ",";
    if (r.age) out += AgeName(*r.age);
    out += ",";
    if (r.ethnicity) out += EthnicityName(*r.ethnicity);
    out += ",";
    if (r.gender) out += GenderName(*r.gender);
    out += "\n";
  }
  return out;
}

void WriteManifest(const Manifest& manifest, const std::filesystem::path& path) {
  const std::string text = FormatManifest(manifest);
  WriteFileBytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

CellTable CountCells(const Manifest& manifest) {
  CellTable cells{};
  for (const ManifestRow& r : manifest.rows) {
    if (r.labeled()) ++cells[r.cell()];
  }
  return cells;
}

double JointEntropy(const CellTable& cells) {
  std::int64_t total = 0;
  for (auto c : cells) {
    if (c < 0) throw InvalidArgument("cell counts must be nonnegative");
    total += c;
  }
  if (total == 0) throw InvalidArgument("joint entropy of an empty cell table");
  double h = 0.0;
  for (auto c : cells) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

BalanceResult BalanceSubset(const Manifest& manifest, std::int64_t n, std::uint64_t seed) {
  std::vector<std::string> unlabeled;
  for (const ManifestRow& r : manifest.rows) {
    if (!r.labeled()) unlabeled.push_back(r.id);
  }
  if (!unlabeled.empty()) {
    std::string list;
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
      if (i) list += ", ";
      list += unlabeled[i];
    }
    throw InvalidArgument("balance needs every row labeled; unlabeled ids: " + list);
  }
  const auto size = static_cast<std::int64_t>(manifest.rows.size());
  if (n < 0 || n > size) {
    throw InvalidArgument("subset size " + std::to_string(n) + " outside [0, " +
                          std::to_string(size) + "]");
  }

  BalanceResult result;
  result.subset.base_dir = manifest.base_dir;
  std::array<std::vector<std::size_t>, kCells> members;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    members[manifest.rows[i].cell()].push_back(i);
  }
  for (int c = 0; c < kCells; ++c) {
    result.available[c] = static_cast<std::int64_t>(members[c].size());
    std::mt19937_64 engine =
        StreamKey(seed, "balance").With(static_cast<std::uint64_t>(c)).Engine();
    std::shuffle(members[c].begin(), members[c].end(), engine);
  }

  // Largest cells first; ties by cell index.
  std::array<int, kCells> order;
  for (int c = 0; c < kCells; ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return result.available[a] > result.available[b];
  });

  const std::int64_t base = n / kCells;
  const std::int64_t remainder = n % kCells;
  for (int k = 0; k < kCells; ++k) {
    result.quota[order[k]] = base + (k < remainder ? 1 : 0);
  }

  std::int64_t deficit = 0;
  for (int c = 0; c < kCells; ++c) {
    result.selected[c] = std::min(result.quota[c], result.available[c]);
    deficit += result.quota[c] - result.selected[c];
  }
  result.spilled = deficit;
  // Hand the deficit out one row at a time, largest cells first.
  while (deficit > 0) {
    bool progressed = false;
    for (int k = 0; k < kCells && deficit > 0; ++k) {
      const int c = order[k];
      if (result.selected[c] < result.available[c]) {
        ++result.selected[c];
        --deficit;
        progressed = true;
      }
    }
    if (!progressed) break;
  }

  std::vector<std::size_t> picked;
  for (int c = 0; c < kCells; ++c) {
    picked.insert(picked.end(), members[c].begin(), members[c].begin() + result.selected[c]);
  }
  std::sort(picked.begin(), picked.end());
  for (std::size_t i : picked) result.subset.rows.push_back(manifest.rows[i]);
  return result;
}

Raster MakeProbeImage(int size, std::uint64_t seed, int index) {
  if (size < 1) throw InvalidArgument("probe size must be >= 1");
  std::mt19937_64 rng = StreamKey(seed, "probe").With(static_cast<std::uint64_t>(index)).Engine();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = size;
  std::vector<double> img(static_cast<std::size_t>(n) * n * 3);
  auto px = [&](int y, int x, int c) -> double& {
    return img[(static_cast<std::size_t>(y) * n + x) * 3 + c];
  };

  // Illumination gradient between two colours.
  double ca[3], cb[3];
  for (int c = 0; c < 3; ++c) {
    ca[c] = 0.15 + 0.7 * u(rng);
    cb[c] = 0.15 + 0.7 * u(rng);
  }
  const double angle = 2.0 * std::numbers::pi * u(rng);
  const double dx = std::cos(angle), dy = std::sin(angle);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double t = 0.5 + 0.5 * (dx * ((x + 0.5) / n - 0.5) + dy * ((y + 0.5) / n - 0.5)) * 1.41;
      for (int c = 0; c < 3; ++c) px(y, x, c) = ca[c] + (cb[c] - ca[c]) * t;
    }
  }

  // Soft-edged ellipses.
  const int shapes = 6 + static_cast<int>(u(rng) * 6);
  for (int s = 0; s < shapes; ++s) {
    const double cx = u(rng) * n, cy = u(rng) * n;
    const double rx = (0.05 + 0.25 * u(rng)) * n, ry = (0.05 + 0.25 * u(rng)) * n;
    const double rot = std::numbers::pi * u(rng);
    const double edge = 0.5 + 3.0 * u(rng);
    const double alpha = 0.5 + 0.5 * u(rng);
    double col[3];
    for (double& v : col) v = u(rng);
    const double cr = std::cos(rot), sr = std::sin(rot);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double ox = x + 0.5 - cx, oy = y + 0.5 - cy;
        const double ex = (cr * ox + sr * oy) / rx, ey = (-sr * ox + cr * oy) / ry;
        const double r = std::sqrt(ex * ex + ey * ey);
        // Signed distance to the boundary in pixels, approximately.
        const double dist = (r - 1.0) * std::min(rx, ry);
        const double cover = alpha / (1.0 + std::exp(dist / (0.35 * edge)));
        if (cover < 1e-4) continue;
        for (int c = 0; c < 3; ++c) px(y, x, c) += cover * (col[c] - px(y, x, c));
      }
    }
  }

  // Oriented gratings inside soft discs.
  const int patches = 2 + static_cast<int>(u(rng) * 3);
  for (int p = 0; p < patches; ++p) {
    const double cx = u(rng) * n, cy = u(rng) * n;
    const double radius = (0.1 + 0.15 * u(rng)) * n;
    const double period = 3.0 + 9.0 * u(rng);
    const double theta = std::numbers::pi * u(rng);
    const double amp = 0.08 + 0.12 * u(rng);
    const double kx = std::cos(theta) * 2.0 * std::numbers::pi / period;
    const double ky = std::sin(theta) * 2.0 * std::numbers::pi / period;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double ox = x + 0.5 - cx, oy = y + 0.5 - cy;
        const double r2 = (ox * ox + oy * oy) / (radius * radius);
        if (r2 > 9.0) continue;
        const double v = amp * std::exp(-r2) * std::sin(kx * x + ky * y);
        for (int c = 0; c < 3; ++c) px(y, x, c) += v;
      }
    }
  }

  // Multi-octave value noise with a falling spectrum.
  for (int octave = 0; octave < 6; ++octave) {
    const int cells = 4 << octave;
    const double amp = 0.12 * std::pow(0.6, octave);
    std::vector<double> grid(static_cast<std::size_t>(cells + 1) * (cells + 1) * 3);
    for (double& v : grid) v = u(rng) - 0.5;
    // Mostly luminance with a little chroma.
    for (std::size_t k = 0; k < grid.size(); k += 3) {
      const double l = grid[k];
      grid[k + 1] = l + 0.25 * grid[k + 1];
      grid[k + 2] = l + 0.25 * grid[k + 2];
      grid[k] = l + 0.25 * (u(rng) - 0.5);
    }
    auto g = [&](int gy, int gx, int c) {
      return grid[(static_cast<std::size_t>(gy) * (cells + 1) + gx) * 3 + c];
    };
    for (int y = 0; y < n; ++y) {
      const double fy = (y + 0.5) / n * cells;
      const int iy = std::min(static_cast<int>(fy), cells - 1);
      double ty = fy - iy;
      ty = ty * ty * (3.0 - 2.0 * ty);
      for (int x = 0; x < n; ++x) {
        const double fx = (x + 0.5) / n * cells;
        const int ix = std::min(static_cast<int>(fx), cells - 1);
        double tx = fx - ix;
        tx = tx * tx * (3.0 - 2.0 * tx);
        for (int c = 0; c < 3; ++c) {
          const double top = g(iy, ix, c) + (g(iy, ix + 1, c) - g(iy, ix, c)) * tx;
          const double bot = g(iy + 1, ix, c) + (g(iy + 1, ix + 1, c) - g(iy + 1, ix, c)) * tx;
          px(y, x, c) += amp * (top + (bot - top) * ty);
        }
      }
    }
  }

  for (double& v : img) v = std::clamp(v, 0.02, 0.98);
  return Raster(n, n, 3, std::move(img));
}

Manifest WriteProbeSet(const std::filesystem::path& dir, int count, int size,
                       std::uint64_t seed) {
  if (count < 0) throw InvalidArgument("probe count must be >= 0");
  std::filesystem::create_directories(dir);
  Manifest m;
  m.base_dir = dir;
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "probe_%03d", i);
    const std::string file = std::string(name) + ".png";
    WriteImage(QuantizeTo8Bit(MakeProbeImage(size, seed, i)), dir / file);
    m.rows.push_back({name, file, std::nullopt, std::nullopt, std::nullopt});
  }
  WriteManifest(m, dir / "manifest.csv");
  return m;
}

}  // namespace idard::data
