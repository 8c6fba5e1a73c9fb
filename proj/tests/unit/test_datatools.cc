#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "idard/codec.h"
#include "idard/datatools.h"
#include "idard/error.h"
#include "test_util.h"

namespace idard::data {
namespace {

// Full factorial manifest with `per_cell(c)` rows in cell c.
template <class F>
Manifest Factorial(F per_cell) {
  Manifest m;
  int next = 0;
  for (int a = 0; a < kAgeGroups; ++a) {
    for (int e = 0; e < kEthnicities; ++e) {
      for (int g = 0; g < kGenders; ++g) {
        const int cell = (a * kEthnicities + e) * kGenders + g;
        for (int k = 0; k < per_cell(cell); ++k) {
          const std::string id = "r" + std::to_string(next++);
          m.rows.push_back({id, id + ".png", a, e, g});
        }
      }
    }
  }
  return m;
}

TEST(Vocab, ParseNamesAndCodes) {
  EXPECT_EQ(ParseAge("Middle_Aged"), 2);
  EXPECT_EQ(ParseAge("MI"), 0);
  EXPECT_EQ(ParseAge(" s "), 3);
  EXPECT_EQ(ParseEthnicity("W"), 1);
  EXPECT_EQ(ParseGender("female"), 1);
  EXPECT_FALSE(ParseGender("x").has_value());
  EXPECT_EQ(AgeName(1), "youth");
}

TEST(Manifest, ParseAndRoundTrip) {
  const std::string text =
      "id,path,age,ethnicity,gender\n"
      "a,img/a.png,youth,asian,male\n"
      "\"b,2\",\"dir with \"\"q\"\"/b.png\",S,B,F\n"
      "c,c.png,,,\n";
  const Manifest m = ParseManifest(text, "/data");
  ASSERT_EQ(m.rows.size(), 3u);
  EXPECT_EQ(m.rows[1].id, "b,2");
  EXPECT_EQ(m.rows[1].path, "dir with \"q\"/b.png");
  EXPECT_EQ(m.rows[1].cell(), (3 * 3 + 2) * 2 + 1);
  EXPECT_FALSE(m.rows[2].labeled());
  EXPECT_EQ(m.Resolve(m.rows[0]), std::filesystem::path("/data/img/a.png"));
  const Manifest again = ParseManifest(FormatManifest(m), "/data");
  ASSERT_EQ(again.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(again.rows[i].id, m.rows[i].id);
    EXPECT_EQ(again.rows[i].path, m.rows[i].path);
    EXPECT_EQ(again.rows[i].age, m.rows[i].age);
  }
}

TEST(Manifest, MinimalHeader) {
  const Manifest m = ParseManifest("id,path\nx,x.png\n");
  ASSERT_EQ(m.rows.size(), 1u);
  EXPECT_FALSE(m.rows[0].labeled());
}

TEST(Manifest, Errors) {
  EXPECT_THROW(ParseManifest("id,path,colour\n"), ConfigError);
  EXPECT_THROW(ParseManifest("path\nx\n"), ConfigError);
  EXPECT_THROW(ParseManifest("id,path\na,a.png\na,b.png\n"), ConfigError);
  EXPECT_THROW(ParseManifest("id,path,age\na,a.png,ancient\n"), ConfigError);
  EXPECT_THROW(ParseManifest("id,path\na,a.png,extra\n"), ConfigError);
  EXPECT_THROW(ParseManifest("id,path\n\"a,a.png\n"), ConfigError);
}

TEST(Entropy, UniformIsLog24) {
  CellTable t;
  t.fill(10);
  EXPECT_NEAR(JointEntropy(t), std::log2(24.0), 1e-12);
  EXPECT_NEAR(JointEntropy(t), 4.5850, 5e-5);
}

TEST(Entropy, Frozen) {
  CellTable t{};
  t[0] = 1;
  EXPECT_EQ(JointEntropy(t), 0.0);
  t[1] = 1;
  EXPECT_NEAR(JointEntropy(t), 1.0, 1e-15);
  t[2] = 2;
  EXPECT_NEAR(JointEntropy(t), 1.5, 1e-15);
  EXPECT_THROW(JointEntropy(CellTable{}), InvalidArgument);
}

TEST(Balance, ExactOnRichFactorial) {
  const Manifest m = Factorial([](int c) { return 5 + c; });
  const BalanceResult r = BalanceSubset(m, 72, 1);
  EXPECT_EQ(r.subset.rows.size(), 72u);
  for (int c = 0; c < kCells; ++c) EXPECT_EQ(r.selected[c], 3);
  EXPECT_EQ(r.spilled, 0);
  EXPECT_NEAR(JointEntropy(CountCells(r.subset)), std::log2(24.0), 1e-12);
}

TEST(Balance, RemainderGoesToLargestCells) {
  const Manifest m = Factorial([](int c) { return 5 + c; });
  const BalanceResult r = BalanceSubset(m, 26, 1);
  // Cells 23 and 22 are largest.
  EXPECT_EQ(r.quota[23], 2);
  EXPECT_EQ(r.quota[22], 2);
  EXPECT_EQ(r.quota[0], 1);
}

TEST(Balance, DeficitSpills) {
  // Cell 0 has a single row; its unmet quota moves elsewhere.
  const Manifest m = Factorial([](int c) { return c == 0 ? 1 : 10; });
  const BalanceResult r = BalanceSubset(m, 48, 3);
  EXPECT_EQ(r.subset.rows.size(), 48u);
  EXPECT_EQ(r.selected[0], 1);
  EXPECT_EQ(r.spilled, 1);
  std::int64_t total = 0;
  for (int c = 0; c < kCells; ++c) {
    EXPECT_LE(r.selected[c], r.available[c]);
    total += r.selected[c];
  }
  EXPECT_EQ(total, 48);
}

TEST(Balance, KeepsManifestOrderAndIsSeeded) {
  const Manifest m = Factorial([](int) { return 6; });
  const BalanceResult a = BalanceSubset(m, 30, 7);
  const BalanceResult b = BalanceSubset(m, 30, 7);
  const BalanceResult c = BalanceSubset(m, 30, 8);
  std::vector<std::string> ia, ib, ic;
  for (const auto& r : a.subset.rows) ia.push_back(r.id);
  for (const auto& r : b.subset.rows) ib.push_back(r.id);
  for (const auto& r : c.subset.rows) ic.push_back(r.id);
  EXPECT_EQ(ia, ib);
  EXPECT_NE(ia, ic);
  std::map<std::string, int> pos;
  for (std::size_t i = 0; i < m.rows.size(); ++i) pos[m.rows[i].id] = static_cast<int>(i);
  for (std::size_t i = 1; i < ia.size(); ++i) EXPECT_LT(pos[ia[i - 1]], pos[ia[i]]);
}

TEST(Balance, Errors) {
  Manifest m = Factorial([](int) { return 1; });
  EXPECT_THROW(BalanceSubset(m, 25, 0), InvalidArgument);
  EXPECT_THROW(BalanceSubset(m, -1, 0), InvalidArgument);
  m.rows.push_back({"nolabel", "n.png", std::nullopt, std::nullopt, std::nullopt});
  try {
    BalanceSubset(m, 5, 0);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("nolabel"), std::string::npos);
  }
}

TEST(Probes, DeterministicAndVaried) {
  const Raster a = MakeProbeImage(64, 1, 0);
  EXPECT_EQ(a, MakeProbeImage(64, 1, 0));
  EXPECT_NE(a, MakeProbeImage(64, 1, 1));
  EXPECT_EQ(a.channels(), 3);
  double lo = 1, hi = 0;
  for (double v : a.samples()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GE(lo, 0.02);
  EXPECT_LE(hi, 0.98);
  EXPECT_GT(hi - lo, 0.3);
}

TEST(Probes, WriteSet) {
  testing::ScratchDir dir;
  const Manifest m = WriteProbeSet(dir.path(), 3, 32, 5);
  ASSERT_EQ(m.rows.size(), 3u);
  const Manifest read = ReadManifest(dir / "manifest.csv");
  ASSERT_EQ(read.rows.size(), 3u);
  EXPECT_EQ(ReadImage(read.Resolve(read.rows[2])), QuantizeTo8Bit(MakeProbeImage(32, 5, 2)));
}

}  // namespace
}  // namespace idard::data
