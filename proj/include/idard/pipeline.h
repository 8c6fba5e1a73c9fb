#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "idard/degrade.h"
#include "idard/image.h"
#include "idard/metrics.h"
#include "idard/rng.h"
#include "idard/upscalers.h"

namespace idard {
class Backend;
}

namespace idard::pipeline {

inline constexpr std::string_view kVersion = "0.1.0";

struct DownscaleConfig {
  // nearest | bilinear | bicubic | lanczos3 | box | dpid | plugin
  std::string method = "bicubic";
  int factor = 8;
  double lambda = resample::kDefaultDpidLambda;  // dpid only
  std::string plugin;                            // command template
  double plugin_timeout_s = 120.0;
  // Snap the LR image onto the 8-bit grid, as a plugin round trip would.
  bool quantize = false;
};

struct UpscaleConfig {
  std::string kind = "perturbed";  // interp | perturbed | remote
  std::string kernel = "bicubic";
  double tau = upscale::kDefaultTau;
  std::string endpoint;  // "stdio:<cmd>" or "tcp:<host>:<port>"
  // Stage factors whose product equals the downscale factor; empty means a
  // single stage.
  std::vector<int> chain;
};

enum class OnError { kAbort, kSkip };

// The family op is appended to the base degradation at each level. For
// "stack", op j joins at level steps[j] (default j + 1) and level k applies
// every op with step <= k in listed order.
struct SweepConfig {
  std::string family;  // blur | noise | contrast | quantize | stack
  std::vector<double> levels;
  std::vector<degrade::DegradationOp> ops;
  std::vector<int> steps;
};

struct ScaleSweepConfig {
  std::vector<int> factors;
  std::map<int, std::vector<int>> chains;  // factor -> stage factors
};

struct RunConfig {
  std::filesystem::path manifest;
  std::optional<int> limit;  // N_X cap
  OnError on_error = OnError::kAbort;
  DownscaleConfig downscale;
  degrade::DegradationSpec degrade;
  UpscaleConfig upscale;
  metrics::DistortionKind distortion = metrics::DistortionKind::kOneMinusMsSsim;
  int samples = 5;  // N_Q
  std::uint64_t seed = 0;
  int workers = 1;
  bool keep_samples = false;
  std::filesystem::path out;
  SweepConfig sweep;
  ScaleSweepConfig scale_sweep;
};

// Parses the TOML run config; relative paths resolve against `base_dir`.
// Throws ConfigError on unknown keys or invalid values.
RunConfig ParseRunConfig(std::string_view toml_text, const std::filesystem::path& base_dir);
RunConfig LoadRunConfig(const std::filesystem::path& path);
// Throws ConfigError when the combination is unusable.
void ValidateRunConfig(const RunConfig& cfg);

// Parses one op table, e.g. {op = "blur", sigma = 1.0, ksize = 3}.
degrade::DegradationOp ParseDegradationOp(const std::map<std::string, double>& fields,
                                          const std::string& op);

struct StageTimes {
  double load = 0.0;
  double downscale = 0.0;
  double upscale = 0.0;
  double metric = 0.0;

  double total() const { return load + downscale + upscale + metric; }
  StageTimes& operator+=(const StageTimes& o);
};

struct ImageRecord {
  std::string id;
  std::vector<double> distortions;  // d_{x,i}, i = 1..N_Q
  double mean = 0.0;                // s_x
  double spread = 0.0;              // population std over i
  StageTimes times;
};

struct SkippedImage {
  std::string id;
  std::string kind;
  std::string message;
};

struct ScoreReport {
  std::vector<ImageRecord> images;  // sorted by id
  std::vector<SkippedImage> skipped;
  std::optional<double> score;      // S; absent when no image was scored
  double std = 0.0;                 // population std of s_x over images
  double sample_spread = 0.0;       // mean over images of per-image spread
  int n_samples = 0;
  StageTimes stage_totals;
  double wall_seconds = 0.0;
  bool aborted = false;
  nlohmann::json metadata;
};

// Built from a config so that sweeps can share one backend connection pool.
struct RunContext {
  std::shared_ptr<Backend> backend;  // null unless a remote stage is used
};
RunContext MakeRunContext(const RunConfig& cfg);

// The LR image f_ds(x) for one image.
Raster DownscaleImage(const RunConfig& cfg, const Raster& img, const StreamKey& key);
// Upscaler for `factor`, honouring configured chains.
upscale::Upscaler MakeUpscaler(const RunConfig& cfg, const RunContext& ctx, int factor,
                               const std::vector<int>& chain = {});

// Runs the estimator. With cfg.out set, writes report.json and samples.csv
// (and sample PNGs with keep_samples). On abort the partial report is
// flushed and the error rethrown.
ScoreReport IdardScore(const RunConfig& cfg);
ScoreReport IdardScore(const RunConfig& cfg, const RunContext& ctx);

// Average ranks for ties. Throws InvalidArgument on length mismatch or fewer
// than two points, UndefinedCorrelation when either list is constant.
double Spearman(const std::vector<double>& xs, const std::vector<double>& ys);

struct SweepLevel {
  double level = 0.0;
  std::string label;
  ScoreReport report;
};

struct SweepResult {
  std::string family;
  std::vector<SweepLevel> levels;
  double rho = 0.0;
};

// One estimator run per level of cfg.sweep (outputs under out/level_<k>).
SweepResult Sweep(const RunConfig& cfg);
// One estimator run per factor of cfg.scale_sweep (outputs under out/x<f>).
SweepResult ScaleSweep(const RunConfig& cfg);

nlohmann::json ReportToJson(const ScoreReport& report);
nlohmann::json SweepToJson(const SweepResult& result);
// Per-stage timing table (cumulative and per image) for a report.
nlohmann::json TimingToJson(const ScoreReport& report);

std::string FormatSamplesCsv(const ScoreReport& report);
void WriteReport(const ScoreReport& report, const std::filesystem::path& dir);

struct PersistedSamples {
  std::vector<ImageRecord> images;  // distortions and recomputed means
  std::optional<double> score;
  double std = 0.0;
};
// Re-aggregates a samples.csv written by WriteReport.
PersistedSamples ReadSamplesCsv(const std::filesystem::path& path);

}  // namespace idard::pipeline
