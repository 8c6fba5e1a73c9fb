#include <gtest/gtest.h>

#include <chrono>

#include "idard/error.h"
#include "idard/plugin.h"
#include "idard/process.h"
#include "idard/resample.h"
#include "test_util.h"

namespace idard {
namespace {

using namespace std::chrono_literals;

const std::string kCli = IDARD_CLI_PATH;

TEST(Template, ExpandsAndQuotes) {
  EXPECT_EQ(ExpandPluginTemplate("ds {in} {out} -s {factor}", "/a b/in.png", "o'.png", 8),
            "ds '/a b/in.png' 'o'\\''.png' -s 8");
  EXPECT_THROW(ExpandPluginTemplate("ds {in}", "a", "b", 2), ConfigError);
  EXPECT_THROW(ExpandPluginTemplate("ds {out}", "a", "b", 2), ConfigError);
}

TEST(Shell, QuoteRoundTrip) {
  const std::string tricky = "a'b \"c\" $d `e`";
  const RunResult r = RunShell("printf %s " + ShellQuote(tricky), 10s);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.stdout_text, tricky);
}

// The harness's own CLI used as a plugin must reproduce the in-process box
// downscale of the 8-bit image exactly (after the 8-bit round trip).
TEST(Plugin, SelfHostingIsBitExact) {
  const Raster img = testing::RandomRaster(37, 29, 3, 1);
  const PluginDownscaler plugin{kCli + " downscale --method box --factor {factor} {in} {out}"};
  const Raster got = RunPlugin(plugin, img, 4);
  const Raster want =
      QuantizeTo8Bit(resample::Downscale(QuantizeTo8Bit(img), 4, resample::KernelKind::kBox));
  EXPECT_EQ(got, want);
}

TEST(Plugin, NonzeroExitCarriesStderr) {
  const PluginDownscaler plugin{"echo boom >&2; exit 3 # {in} {out}"};
  try {
    RunPlugin(plugin, Raster::Filled(8, 8, 1, 0.5), 2);
    FAIL();
  } catch (const PluginError& e) {
    EXPECT_EQ(e.exit_code(), 3);
    EXPECT_NE(e.captured_stderr().find("boom"), std::string::npos);
  }
}

TEST(Plugin, WrongDimsIsPluginError) {
  const PluginDownscaler plugin{kCli + " downscale --method box --factor 2 {in} {out}"};
  EXPECT_THROW(RunPlugin(plugin, Raster::Filled(16, 16, 3, 0.5), 4), PluginError);
}

TEST(Plugin, MissingOutputIsPluginError) {
  EXPECT_THROW(RunPlugin({"true {in} {out}"}, Raster::Filled(8, 8, 1, 0.5), 2), PluginError);
}

TEST(Plugin, TimeoutKillsProcess) {
  const auto start = std::chrono::steady_clock::now();
  try {
    RunPlugin({"sleep 30 # {in} {out}", 300ms}, Raster::Filled(8, 8, 1, 0.5), 2);
    FAIL();
  } catch (const PluginError& e) {
    EXPECT_NE(std::string(e.what()).find("timed out"), std::string::npos);
  }
  EXPECT_LT(std::chrono::steady_clock::now() - start, 10s);
}

TEST(Plugin, InvalidFactor) {
  EXPECT_THROW(RunPlugin({"cp {in} {out}"}, Raster::Filled(4, 4, 1, 0.5), 0), InvalidScale);
  // Factor 1 with a copying plugin is the identity on the 8-bit grid.
  const Raster img = testing::RandomByteRaster(5, 5, 3, 2);
  EXPECT_EQ(RunPlugin({"cp {in} {out}"}, img, 1), img);
}

}  // namespace
}  // namespace idard
