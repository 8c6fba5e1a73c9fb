#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "idard/codec.h"
#include "idard/datatools.h"
#include "idard/error.h"
#include "idard/metrics.h"
#include "idard/pipeline.h"
#include "idard/resample.h"
#include "test_util.h"

namespace idard::pipeline {
namespace {

namespace fs = std::filesystem;

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::ScratchDir();
    data::WriteProbeSet(dir_->path() / "probes", 6, 64, 3);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static RunConfig Base() {
    RunConfig cfg;
    cfg.manifest = dir_->path() / "probes" / "manifest.csv";
    cfg.downscale.factor = 4;
    cfg.samples = 3;
    cfg.seed = 1;
    return cfg;
  }

  static fs::path Dir() { return dir_->path(); }

  static testing::ScratchDir* dir_;
};

testing::ScratchDir* PipelineTest::dir_ = nullptr;

TEST(Config, ParsesEverySection) {
  const RunConfig cfg = ParseRunConfig(R"(
[dataset]
manifest = "data/m.csv"
limit = 4
on_error = "skip"
[downscale]
method = "dpid"
factor = 8
lambda = 0.5
quantize = true
[degrade]
order = "before_downscale"
ops = [{op = "blur", sigma = 1.5, ksize = 5}, {op = "noise", sigma = 0.01}]
[upscale]
kind = "perturbed"
kernel = "lanczos3"
tau = 0.03
chain = [2, 4]
[distortion]
kind = "one_minus_msssim"
[run]
samples = 7
seed = 42
workers = 3
out = "runs/a"
[sweep]
family = "stack"
ops = [{op = "contrast", c = 0.5, step = 2}, {op = "quantize", thresholds = 3}]
[scale_sweep]
factors = [4, 8, 32]
chains = {32 = [8, 4]}
)",
                                       "/base");
  EXPECT_EQ(cfg.manifest, fs::path("/base/data/m.csv"));
  EXPECT_EQ(cfg.limit, 4);
  EXPECT_EQ(cfg.on_error, OnError::kSkip);
  EXPECT_EQ(cfg.downscale.method, "dpid");
  EXPECT_EQ(cfg.downscale.lambda, 0.5);
  EXPECT_TRUE(cfg.downscale.quantize);
  EXPECT_EQ(cfg.degrade.order, degrade::Order::kBeforeDownscale);
  ASSERT_EQ(cfg.degrade.ops.size(), 2u);
  EXPECT_EQ(std::get<degrade::GaussBlur>(cfg.degrade.ops[0]).ksize, 5);
  EXPECT_EQ(cfg.upscale.chain, (std::vector<int>{2, 4}));
  EXPECT_EQ(cfg.samples, 7);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.out, fs::path("/base/runs/a"));
  EXPECT_EQ(cfg.sweep.steps, (std::vector<int>{2, 2}));
  EXPECT_EQ(std::get<degrade::QuantizeOtsu>(cfg.sweep.ops[1]).n_thresholds, 3);
  EXPECT_EQ(cfg.scale_sweep.chains.at(32), (std::vector<int>{8, 4}));
}

TEST(Config, Defaults) {
  const RunConfig cfg = ParseRunConfig("", "");
  EXPECT_EQ(cfg.samples, 5);
  EXPECT_EQ(cfg.downscale.method, "bicubic");
  EXPECT_EQ(cfg.downscale.factor, 8);
  EXPECT_EQ(cfg.upscale.kind, "perturbed");
  EXPECT_EQ(cfg.upscale.tau, upscale::kDefaultTau);
  EXPECT_EQ(cfg.distortion, metrics::DistortionKind::kOneMinusMsSsim);
}

TEST(Config, Rejections) {
  EXPECT_THROW(ParseRunConfig("[run]\nsample = 3\n", ""), ConfigError);
  EXPECT_THROW(ParseRunConfig("[runs]\n", ""), ConfigError);
  EXPECT_THROW(ParseRunConfig("[run]\nsamples = \"3\"\n", ""), ConfigError);
  EXPECT_THROW(ParseRunConfig("[run]\nsamples = 0\n", ""), ConfigError);
  EXPECT_THROW(ParseRunConfig("[upscale]\nchain = [2, 2]\n", ""), ConfigError);
  EXPECT_THROW(ParseRunConfig("[distortion]\nkind = \"ssim\"\n", ""), ConfigError);
  EXPECT_THROW(ParseRunConfig("[upscale]\nkind = \"remote\"\n", ""), ConfigError);
  EXPECT_THROW(ParseRunConfig("[downscale]\nmethod = \"plugin\"\n", ""), ConfigError);
  EXPECT_THROW(ParseRunConfig("[downscale]\nmethod = \"spline\"\n", ""), ConfigError);
  EXPECT_THROW(ParseRunConfig("[degrade]\nops = [{op = \"blur\", radius = 2}]\n", ""), ConfigError);
  EXPECT_THROW(ParseRunConfig("[degrade]\nops = [{op = \"blur\", ksize = 4}]\n", ""), ConfigError);
  EXPECT_THROW(ParseRunConfig("[degrade]\nops = [{op = \"sharpen\"}]\n", ""), ConfigError);
  EXPECT_THROW(ParseRunConfig("[scale_sweep]\nchains = {32 = [8, 2]}\n", ""), ConfigError);
  EXPECT_THROW(ParseRunConfig("not toml = = 1", ""), ConfigError);
  EXPECT_THROW(LoadRunConfig("/nonexistent/run.toml"), IoError);
}

TEST(Config, ExampleInDocsParses) {
  const fs::path example = fs::path(IDARD_DOCS_DIR) / "example_run.toml";
  ASSERT_TRUE(fs::exists(example));
  const RunConfig cfg = LoadRunConfig(example);
  EXPECT_EQ(cfg.downscale.factor, 8);
}

TEST(Spearman, Frozen) {
  EXPECT_DOUBLE_EQ(Spearman({1, 2, 3}, {10, 20, 30}), 1.0);
  EXPECT_DOUBLE_EQ(Spearman({1, 2, 3}, {3, 2, 1}), -1.0);
  // ranks x = 1,2,3,4; y = 1,3,2,4 -> rho = 1 - 6*2/(4*15) = 0.8
  EXPECT_NEAR(Spearman({1, 2, 3, 4}, {1, 3, 2, 4}), 0.8, 1e-15);
  // tie: y ranks 1.5, 1.5, 3
  EXPECT_NEAR(Spearman({1, 2, 3}, {5, 5, 9}), 0.8660254037844387, 1e-15);
  EXPECT_THROW(Spearman({1, 2}, {4, 4}), UndefinedCorrelation);
  EXPECT_THROW(Spearman({1}, {1}), InvalidArgument);
  EXPECT_THROW(Spearman({1, 2}, {1}), InvalidArgument);
}

TEST_F(PipelineTest, ScoreMatchesHandComputedEstimator) {
  RunConfig cfg = Base();
  const ScoreReport r = IdardScore(cfg);
  ASSERT_EQ(r.images.size(), 6u);
  const data::Manifest m = data::ReadManifest(cfg.manifest);
  const upscale::Upscaler up = upscale::Upscaler::Perturbed(4, resample::KernelKind::kBicubic);
  std::vector<double> means;
  for (const auto& row : m.rows) {
    const Raster hr = ReadImage(m.Resolve(row));
    const Raster lr = resample::Downscale(hr, 4, resample::KernelKind::kBicubic);
    const StreamKey key(1, row.id);
    double sum = 0;
    for (int i = 1; i <= 3; ++i) sum += 1.0 - metrics::MsSsim(hr, up.Sample(lr, i, key));
    means.push_back(sum / 3);
  }
  double s = 0;
  for (double v : means) s += v;
  s /= means.size();
  EXPECT_NEAR(*r.score, s, 1e-12);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(r.images[k].mean, means[k], 1e-12);
  EXPECT_GT(r.sample_spread, 0.0);
  EXPECT_EQ(r.n_samples, 3);
}

TEST_F(PipelineTest, DeterministicUpscalerHasNoSpread) {
  RunConfig cfg = Base();
  cfg.upscale.kind = "interp";
  const ScoreReport r = IdardScore(cfg);
  EXPECT_EQ(r.sample_spread, 0.0);
  for (const auto& img : r.images) {
    for (double d : img.distortions) EXPECT_EQ(d, img.distortions[0]);
  }
}

TEST_F(PipelineTest, WorkersDoNotChangeOutput) {
  RunConfig a = Base();
  a.out = Dir() / "w1";
  RunConfig b = a;
  b.workers = 4;
  b.out = Dir() / "w4";
  IdardScore(a);
  IdardScore(b);
  EXPECT_EQ(Slurp(a.out / "samples.csv"), Slurp(b.out / "samples.csv"));
  EXPECT_FALSE(Slurp(a.out / "samples.csv").empty());
}

TEST_F(PipelineTest, SamplesCsvRoundTripsExactly) {
  RunConfig cfg = Base();
  cfg.out = Dir() / "rt";
  const ScoreReport r = IdardScore(cfg);
  const PersistedSamples p = ReadSamplesCsv(cfg.out / "samples.csv");
  ASSERT_TRUE(p.score);
  EXPECT_EQ(*p.score, *r.score);
  EXPECT_EQ(p.std, r.std);
  const auto j = nlohmann::json::parse(Slurp(cfg.out / "report.json"));
  EXPECT_EQ(j["schema"], "idard.report/1");
  EXPECT_EQ(j["score"].get<double>(), *r.score);
  EXPECT_EQ(j["metadata"]["downscaler"]["grid_convention"], "align-centers");
  EXPECT_TRUE(j["timing"].contains("per_image_s"));
}

TEST_F(PipelineTest, LimitAndKeepSamples) {
  RunConfig cfg = Base();
  cfg.limit = 2;
  cfg.keep_samples = true;
  cfg.out = Dir() / "keep";
  const ScoreReport r = IdardScore(cfg);
  EXPECT_EQ(r.images.size(), 2u);
  EXPECT_TRUE(fs::exists(cfg.out / "samples" / "probe_000_3.png"));
  cfg.limit = 99;
  EXPECT_THROW(IdardScore(cfg), ConfigError);
}

TEST_F(PipelineTest, SkipAndAbortOnLoadErrors) {
  const fs::path d = Dir() / "broken";
  fs::create_directories(d);
  fs::copy_file(Dir() / "probes" / "probe_000.png", d / "good.png");
  std::ofstream(d / "bad.png") << "not an image";
  std::ofstream(d / "m.csv") << "id,path\ngood,good.png\nbad,bad.png\nmissing,nope.png\n";
  RunConfig cfg = Base();
  cfg.manifest = d / "m.csv";
  cfg.on_error = OnError::kSkip;
  const ScoreReport r = IdardScore(cfg);
  EXPECT_EQ(r.images.size(), 1u);
  ASSERT_EQ(r.skipped.size(), 2u);
  EXPECT_EQ(r.skipped[0].id, "bad");
  EXPECT_EQ(r.skipped[0].kind, "decode");
  EXPECT_EQ(r.skipped[1].kind, "io");

  cfg.on_error = OnError::kAbort;
  cfg.out = d / "out";
  EXPECT_THROW(IdardScore(cfg), DecodeError);
  const auto j = nlohmann::json::parse(Slurp(cfg.out / "report.json"));
  EXPECT_TRUE(j["aborted"].get<bool>());
  EXPECT_EQ(j["metadata"]["abort"]["kind"], "decode");
}

TEST_F(PipelineTest, NonLoadErrorsAbortEvenInSkipMode) {
  RunConfig cfg = Base();
  cfg.downscale.factor = 3;  // 64 is not divisible by 3
  cfg.on_error = OnError::kSkip;
  EXPECT_THROW(IdardScore(cfg), DimensionError);
}

TEST_F(PipelineTest, OrderVariantsDiffer) {
  RunConfig cfg = Base();
  cfg.degrade.ops = {degrade::GaussNoise{0.05, 0}};
  const double after = *IdardScore(cfg).score;
  cfg.degrade.order = degrade::Order::kBeforeDownscale;
  const double before = *IdardScore(cfg).score;
  EXPECT_GT(after, before);
}

TEST_F(PipelineTest, NoiseSweepIsMonotone) {
  RunConfig cfg = Base();
  cfg.sweep.family = "noise";
  cfg.sweep.levels = {0.02, 0.05, 0.1};
  cfg.out = Dir() / "sweep";
  const SweepResult r = Sweep(cfg);
  EXPECT_EQ(r.rho, 1.0);
  ASSERT_EQ(r.levels.size(), 3u);
  EXPECT_TRUE(fs::exists(cfg.out / "sweep.json"));
  EXPECT_TRUE(fs::exists(cfg.out / "level_2" / "samples.csv"));
}

TEST_F(PipelineTest, SweepLevelValidation) {
  RunConfig cfg = Base();
  cfg.sweep.family = "blur";
  cfg.sweep.levels = {1.0, 1.0};
  EXPECT_THROW(Sweep(cfg), UndefinedCorrelation);
  cfg.sweep.levels = {1.0, 2.0, 1.5};
  EXPECT_THROW(Sweep(cfg), ConfigError);
  cfg.sweep.family = "sharpen";
  cfg.sweep.levels = {1.0, 2.0};
  EXPECT_THROW(Sweep(cfg), ConfigError);
}

TEST_F(PipelineTest, StackSweepUsesSteps) {
  RunConfig cfg = Base();
  cfg.sweep.family = "stack";
  cfg.sweep.ops = {degrade::GaussBlur{1.0, 3}, degrade::Contrast{0.5}, degrade::GaussNoise{0.05, 0}};
  cfg.sweep.steps = {1, 3, 2};
  const SweepResult r = Sweep(cfg);
  ASSERT_EQ(r.levels.size(), 3u);
  EXPECT_EQ(r.levels[1].label, "blur(sigma=1,ksize=3) + noise(sigma=0.05) [after_downscale]");
  EXPECT_EQ(r.levels[2].label,
            "blur(sigma=1,ksize=3) + contrast(c=0.5) + noise(sigma=0.05) [after_downscale]");
}

TEST_F(PipelineTest, ScaleSweepWithChain) {
  RunConfig cfg = Base();
  cfg.scale_sweep.factors = {2, 4, 16};
  cfg.scale_sweep.chains[16] = {4, 4};
  const SweepResult r = ScaleSweep(cfg);
  EXPECT_EQ(r.rho, 1.0);
  EXPECT_EQ(r.levels[2].report.metadata["upscaler"]["stages"], nlohmann::json({4, 4}));
}

TEST_F(PipelineTest, RemoteUpscalerAndMetricViaMockProcess) {
  RunConfig cfg = Base();
  cfg.upscale.kind = "remote";
  cfg.upscale.endpoint = std::string("stdio:") + IDARD_MOCK_PATH + " --factors 2,4,8";
  cfg.distortion = metrics::DistortionKind::kLpipsRemote;
  cfg.workers = 2;
  const ScoreReport r = IdardScore(cfg);
  ASSERT_TRUE(r.score);
  EXPECT_EQ(r.metadata["backend"]["mode"], "mock");
  EXPECT_EQ(r.metadata["backend"]["tags"][0], "backbone=mock");
  // Mock samples differ by a constant offset (i mod 3), so the spread is positive.
  EXPECT_GT(r.sample_spread, 0.0);
}

TEST_F(PipelineTest, RemoteFactorIsDecomposed) {
  RunConfig cfg = Base();
  cfg.downscale.factor = 16;
  cfg.upscale.kind = "remote";
  cfg.upscale.endpoint = std::string("stdio:") + IDARD_MOCK_PATH + " --factors 4,8";
  const RunContext ctx = MakeRunContext(cfg);
  const upscale::Upscaler up = MakeUpscaler(cfg, ctx, 16);
  EXPECT_EQ(up.StageFactors(), (std::vector<int>{4, 4}));
  EXPECT_THROW(MakeUpscaler(cfg, ctx, 6), ConfigError);
}

TEST_F(PipelineTest, PluginDownscaleMatchesBuiltinBox) {
  RunConfig cfg = Base();
  cfg.downscale.method = "box";
  cfg.downscale.quantize = true;
  const double builtin = *IdardScore(cfg).score;
  cfg.downscale.method = "plugin";
  cfg.downscale.plugin =
      std::string(IDARD_CLI_PATH) + " downscale --method box --factor {factor} {in} {out}";
  const double plugin = *IdardScore(cfg).score;
  EXPECT_EQ(builtin, plugin);
}

}  // namespace
}  // namespace idard::pipeline
