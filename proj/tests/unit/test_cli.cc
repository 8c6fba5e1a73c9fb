// End-to-end tests of the `idard` binary: exit codes, error JSON and the
// shape of every --json document (checked against files in tests/golden;
// set IDARD_UPDATE_GOLDEN=1 to rewrite them).

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "idard/codec.h"
#include "idard/datatools.h"
#include "idard/process.h"
#include "test_util.h"

namespace idard {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace std::chrono_literals;

RunResult Cli(const std::string& args) {
  return RunShell(ShellQuote(IDARD_CLI_PATH) + " " + args, 300s);
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Replaces every value by its type name; arrays keep only their first
// element's shape.
json Shape(const json& j) {
  if (j.is_object()) {
    json out = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = Shape(it.value());
    return out;
  }
  if (j.is_array()) return j.empty() ? json::array() : json::array({Shape(j[0])});
  if (j.is_number()) return "number";
  return j.type_name();
}

void ExpectShape(const std::string& name, const json& doc) {
  const fs::path path = fs::path(IDARD_GOLDEN_DIR) / (name + ".shape.json");
  const json shape = Shape(doc);
  if (std::getenv("IDARD_UPDATE_GOLDEN") != nullptr) {
    std::ofstream(path) << shape.dump(2) << "\n";
    return;
  }
  ASSERT_TRUE(fs::exists(path)) << "missing golden " << path;
  EXPECT_EQ(shape, json::parse(Slurp(path))) << name;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::ScratchDir();
    data::WriteProbeSet(dir_->path() / "probes", 4, 64, 2);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static fs::path Dir() { return dir_->path(); }
  static std::string Q(const fs::path& p) { return ShellQuote(p.string()); }

  static fs::path WriteConfig(const std::string& name, const std::string& extra) {
    const fs::path p = Dir() / name;
    std::ofstream(p) << "[dataset]\nmanifest = \"probes/manifest.csv\"\n"
                     << "[downscale]\nfactor = 4\n[run]\nsamples = 2\nseed = 3\n"
                     << extra;
    return p;
  }

  static testing::ScratchDir* dir_;
};

testing::ScratchDir* CliTest::dir_ = nullptr;

TEST_F(CliTest, ParseErrorsExitTwo) {
  EXPECT_EQ(Cli("").exit_code, 2);
  EXPECT_EQ(Cli("frobnicate").exit_code, 2);
  EXPECT_EQ(Cli("score").exit_code, 2);
  EXPECT_EQ(Cli("upscale --factor 0 a b").exit_code, 2);
  EXPECT_EQ(Cli("--help").exit_code, 0);
}

TEST_F(CliTest, OperationErrorsExitOneWithJson) {
  const RunResult r = Cli("downscale " + Q(Dir() / "missing.png") + " " + Q(Dir() / "o.png"));
  EXPECT_EQ(r.exit_code, 1);
  const json err = json::parse(r.stderr_text);
  EXPECT_EQ(err["error"]["kind"], "io");
  ExpectShape("error", err);

  const RunResult big = Cli("downscale --factor 128 " + Q(Dir() / "probes" / "probe_000.png") +
                            " " + Q(Dir() / "o.png"));
  EXPECT_EQ(big.exit_code, 1);
  EXPECT_EQ(json::parse(big.stderr_text)["error"]["kind"], "invalid_scale");

  const RunResult bad_op = Cli("degrade --op blur:sigma=1,ksize=4 " +
                               Q(Dir() / "probes" / "probe_000.png") + " " + Q(Dir() / "o.png"));
  EXPECT_EQ(bad_op.exit_code, 1);
}

TEST_F(CliTest, DownscaleDegradeUpscale) {
  const fs::path in = Dir() / "probes" / "probe_001.png";
  RunResult r = Cli("downscale --method dpid --factor 4 --json " + Q(in) + " " + Q(Dir() / "lr.png"));
  ASSERT_EQ(r.exit_code, 0) << r.stderr_text;
  ExpectShape("downscale", json::parse(r.stdout_text));
  EXPECT_EQ(ReadImage(Dir() / "lr.png").width(), 16);

  r = Cli("degrade --factor 4 --op blur:sigma=1 --op noise:sigma=0.02 --seed 5 --json " + Q(in) +
          " " + Q(Dir() / "dg.png"));
  ASSERT_EQ(r.exit_code, 0) << r.stderr_text;
  const json dg = json::parse(r.stdout_text);
  ExpectShape("degrade", dg);
  EXPECT_EQ(dg["image_id"], "probe_001");

  r = Cli("upscale --factor 4 --sample 2 --json " + Q(Dir() / "lr.png") + " " + Q(Dir() / "up.png"));
  ASSERT_EQ(r.exit_code, 0) << r.stderr_text;
  ExpectShape("upscale", json::parse(r.stdout_text));
  EXPECT_EQ(ReadImage(Dir() / "up.png").width(), 64);

  r = Cli("upscale --kind remote --endpoint " +
          ShellQuote(std::string("stdio:") + IDARD_MOCK_PATH) + " --factor 4 " +
          Q(Dir() / "lr.png") + " " + Q(Dir() / "up2.png"));
  EXPECT_EQ(r.exit_code, 0) << r.stderr_text;
}

TEST_F(CliTest, ScoreAndReport) {
  const fs::path cfg = WriteConfig("score.toml", "");
  const fs::path out = Dir() / "score_out";
  RunResult r = Cli("score --config " + Q(cfg) + " --out " + Q(out) + " --workers 2 --json");
  ASSERT_EQ(r.exit_code, 0) << r.stderr_text;
  const json rep = json::parse(r.stdout_text);
  ExpectShape("score", rep);
  EXPECT_EQ(rep["n_images"], 4);

  r = Cli("report --json " + Q(out));
  ASSERT_EQ(r.exit_code, 0) << r.stderr_text;
  const json summary = json::parse(r.stdout_text);
  ExpectShape("report", summary);
  EXPECT_TRUE(summary["consistent"].get<bool>());
  EXPECT_EQ(summary["score"], rep["score"]);

  json tampered = json::parse(Slurp(out / "report.json"));
  tampered["score"] = tampered["score"].get<double>() + 1e-9;
  std::ofstream(out / "report.json") << tampered.dump();
  EXPECT_EQ(Cli("report " + Q(out)).exit_code, 1);
}

TEST_F(CliTest, SeedOverrideChangesScore) {
  const fs::path cfg = WriteConfig("seed.toml", "");
  const json a = json::parse(Cli("score --json --config " + Q(cfg)).stdout_text);
  const json b = json::parse(Cli("score --json --seed 4 --config " + Q(cfg)).stdout_text);
  const json c = json::parse(Cli("score --json --seed 3 --config " + Q(cfg)).stdout_text);
  EXPECT_NE(a["score"], b["score"]);
  EXPECT_EQ(a["score"], c["score"]);
}

TEST_F(CliTest, SweepAndScaleSweep) {
  const fs::path cfg = WriteConfig(
      "sweep.toml",
      "[sweep]\nfamily = \"contrast\"\nlevels = [0.9, 0.6, 0.3]\n"
      "[scale_sweep]\nfactors = [2, 4, 16]\nchains = {16 = [4, 4]}\n");
  RunResult r = Cli("sweep --json --config " + Q(cfg));
  ASSERT_EQ(r.exit_code, 0) << r.stderr_text;
  const json sw = json::parse(r.stdout_text);
  ExpectShape("sweep", sw);
  EXPECT_EQ(sw["rho"], -1.0);
  r = Cli("scale-sweep --config " + Q(cfg));
  ASSERT_EQ(r.exit_code, 0) << r.stderr_text;
  EXPECT_NE(r.stdout_text.find("rho = 1.0000"), std::string::npos);

  const fs::path flat = WriteConfig("flat.toml", "[sweep]\nfamily = \"blur\"\nlevels = [1, 1]\n");
  r = Cli("sweep --config " + Q(flat));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(json::parse(r.stderr_text)["error"]["kind"], "undefined_correlation");
}

TEST_F(CliTest, BalanceAndEntropy) {
  std::ostringstream csv;
  csv << "id,path,age,ethnicity,gender\n";
  int k = 0;
  for (const char* age : {"MI", "Y", "MA", "S"}) {
    for (const char* eth : {"A", "W", "B"}) {
      for (const char* g : {"M", "F"}) {
        for (int rep = 0; rep < 3 + (k % 4); ++rep) {
          csv << "p" << k << "_" << rep << ",img/p" << k << "_" << rep << ".png," << age << ","
              << eth << "," << g << "\n";
        }
        ++k;
      }
    }
  }
  fs::create_directories(Dir() / "faces");
  std::ofstream(Dir() / "faces" / "m.csv") << csv.str();

  RunResult r = Cli("entropy --manifest " + Q(Dir() / "faces" / "m.csv"));
  ASSERT_EQ(r.exit_code, 0) << r.stderr_text;
  r = Cli("balance --manifest " + Q(Dir() / "faces" / "m.csv") + " --n 48 --seed 2 --json --out " +
          Q(Dir() / "subset" / "b.csv"));
  ASSERT_EQ(r.exit_code, 0) << r.stderr_text;
  const json meta = json::parse(r.stdout_text);
  ExpectShape("balance", meta);
  EXPECT_NEAR(meta["joint_entropy"].get<double>(), 4.5850, 5e-5);
  EXPECT_TRUE(fs::exists(Dir() / "subset" / "b.csv.meta.json"));
  const data::Manifest sub = data::ReadManifest(Dir() / "subset" / "b.csv");
  ASSERT_EQ(sub.rows.size(), 48u);
  EXPECT_EQ(sub.rows[0].path.rfind("../faces/img/", 0), 0u) << sub.rows[0].path;

  r = Cli("entropy --manifest " + Q(Dir() / "subset" / "b.csv"));
  EXPECT_EQ(r.stdout_text, "4.5850\n");
  r = Cli("entropy --json --manifest " + Q(Dir() / "subset" / "b.csv"));
  ExpectShape("entropy", json::parse(r.stdout_text));

  r = Cli("balance --manifest " + Q(Dir() / "probes" / "manifest.csv") + " --n 2 --out " +
          Q(Dir() / "x.csv"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(json::parse(r.stderr_text)["error"]["kind"], "invalid_argument");
}

TEST_F(CliTest, MakeProbes) {
  const RunResult r =
      Cli("make-probes --count 2 --size 32 --seed 9 --json --out " + Q(Dir() / "mp"));
  ASSERT_EQ(r.exit_code, 0) << r.stderr_text;
  ExpectShape("make_probes", json::parse(r.stdout_text));
  EXPECT_EQ(ReadImage(Dir() / "mp" / "probe_001.png"),
            QuantizeTo8Bit(data::MakeProbeImage(32, 9, 1)));
}

}  // namespace
}  // namespace idard
