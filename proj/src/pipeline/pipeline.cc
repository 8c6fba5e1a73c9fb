#include "idard/pipeline.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "idard/backend.h"
#include "idard/codec.h"
#include "idard/datatools.h"
#include "idard/error.h"
#include "idard/plugin.h"

namespace idard::pipeline {
namespace {

using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

double Seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
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

// File-name-safe form of an image id.
std::string SafeName(const std::string& id) {
  std::string out;
  for (char ch : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
    out += ok ? ch : '_';
  }
  return out;
}

std::string UtcNow() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool IsLoadError(const std::exception& e) {
  return dynamic_cast<const DecodeError*>(&e) || dynamic_cast<const UnsupportedFormat*>(&e) ||
         dynamic_cast<const IoError*>(&e);
}

std::string ErrorKind(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return err->kind();
  return "internal";
}

void Aggregate(ScoreReport& report) {
  std::vector<double> means;
  double spread_sum = 0.0;
  for (const ImageRecord& r : report.images) {
    means.push_back(r.mean);
    spread_sum += r.spread;
  }
  if (means.empty()) {
    report.score.reset();
    report.std = 0.0;
    report.sample_spread = 0.0;
    return;
  }
  const metrics::MeanStd ms = metrics::ComputeMeanStd(means);
  report.score = ms.mean;
  report.std = ms.std;
  report.sample_spread = spread_sum / static_cast<double>(means.size());
}

json Metadata(const RunConfig& cfg, const RunContext& ctx, const upscale::Upscaler& up) {
  json m;
  m["version"] = std::string(kVersion);
  m["started_at"] = UtcNow();
  m["seed"] = cfg.seed;
  m["n_q"] = cfg.samples;
  m["workers"] = cfg.workers;
  m["manifest"] = cfg.manifest.string();
  m["limit"] = cfg.limit ? json(*cfg.limit) : json(nullptr);
  m["on_error"] = cfg.on_error == OnError::kAbort ? "abort" : "skip";
  json ds;
  ds["method"] = cfg.downscale.method;
  ds["factor"] = cfg.downscale.factor;
  if (cfg.downscale.method == "dpid") {
    ds["lambda"] = cfg.downscale.lambda;
    ds["dpid_guidance"] = "box";
  }
  if (cfg.downscale.method == "plugin") {
    ds["plugin"] = cfg.downscale.plugin;
    ds["plugin_timeout_s"] = cfg.downscale.plugin_timeout_s;
  }
  ds["quantize_8bit"] = cfg.downscale.quantize;
  ds["grid_convention"] = std::string(resample::kGridConvention);
  ds["bicubic_a"] = resample::kBicubicA;
  ds["lanczos_support"] = resample::kLanczosSupport;
  ds["antialias"] = "kernel support stretched by the factor";
  ds["degradation"] = degrade::Describe(cfg.degrade);
  ds["degradation_order"] = std::string(degrade::OrderName(cfg.degrade.order));
  m["downscaler"] = ds;
  json us;
  us["description"] = up.Describe();
  us["factor"] = up.factor();
  us["stages"] = up.StageFactors();
  us["kind"] = cfg.upscale.kind;
  m["upscaler"] = us;
  json dist;
  dist["kind"] = std::string(metrics::DistortionName(cfg.distortion));
  const metrics::SsimParams ssim;
  dist["ssim_window"] = ssim.window;
  dist["ssim_sigma"] = ssim.sigma;
  dist["ssim_k1"] = ssim.k1;
  dist["ssim_k2"] = ssim.k2;
  dist["ssim_dynamic_range"] = 1.0;
  dist["ms_ssim_weights"] = std::vector<double>(std::begin(metrics::kMsSsimWeights),
                                                std::end(metrics::kMsSsimWeights));
  dist["ms_ssim_small_image"] = "drop coarse scales, renormalise weights";
  m["distortion"] = dist;
  m["luma_weights"] = {kLumaR, kLumaG, kLumaB};
  m["intensity_domain"] = "stored 8-bit values / 255, no gamma conversion";
  m["std_kind"] = "population, across per-image means";
  m["sample_spread_kind"] = "mean over images of the population std over samples";
  m["rng"] = "mt19937_64 seeded from splitmix64/fnv1a stream keys (seed, image id, stage, index)";
  if (ctx.backend) {
    const protocol::Hello hello = ctx.backend->Capabilities();
    json b;
    b["endpoint"] = ctx.backend->endpoint();
    b["mode"] = hello.mode;
    b["factors"] = hello.factors;
    b["metric_kinds"] = hello.metric_kinds;
    b["tags"] = hello.tags;
    b["metadata"] = hello.metadata;
    m["backend"] = b;
  }
  return m;
}

std::vector<data::ManifestRow> SelectRows(const RunConfig& cfg, data::Manifest& manifest) {
  manifest = data::ReadManifest(cfg.manifest);
  std::vector<data::ManifestRow> rows = manifest.rows;
  if (cfg.limit) {
    if (static_cast<std::size_t>(*cfg.limit) > rows.size()) {
      throw ConfigError("dataset.limit " + std::to_string(*cfg.limit) + " exceeds manifest size " +
                        std::to_string(rows.size()));
    }
    rows.resize(static_cast<std::size_t>(*cfg.limit));
  }
  return rows;
}

}  // namespace

StageTimes& StageTimes::operator+=(const StageTimes& o) {
  load += o.load;
  downscale += o.downscale;
  upscale += o.upscale;
  metric += o.metric;
  return *this;
}

RunContext MakeRunContext(const RunConfig& cfg) {
  RunContext ctx;
  const bool needs_backend = cfg.upscale.kind == "remote" ||
                             cfg.distortion == metrics::DistortionKind::kLpipsRemote;
  if (needs_backend) {
    ctx.backend = std::make_shared<Backend>(EndpointSpec::Parse(cfg.upscale.endpoint),
                                            static_cast<std::size_t>(cfg.workers));
  }
  return ctx;
}

Raster DownscaleImage(const RunConfig& cfg, const Raster& img, const StreamKey& key) {
  const DownscaleConfig& d = cfg.downscale;
  degrade::BaseDownscaler base;
  if (d.method == "plugin") {
    PluginDownscaler plugin{d.plugin, std::chrono::milliseconds(
                                          static_cast<std::int64_t>(d.plugin_timeout_s * 1000))};
    base = [plugin, factor = d.factor](const Raster& x) { return RunPlugin(plugin, x, factor); };
  } else if (d.method == "dpid") {
    base = [factor = d.factor, lambda = d.lambda](const Raster& x) {
      return resample::DpidDownscale(x, factor, lambda);
    };
  } else {
    const auto kernel = resample::ParseKernel(d.method);
    if (!kernel) throw ConfigError("unknown downscale method '" + d.method + "'");
    base = [factor = d.factor, k = *kernel](const Raster& x) {
      return resample::Downscale(x, factor, k);
    };
  }
  Raster lr = degrade::ApplySpec(cfg.degrade, base, img, key);
  if (d.quantize) lr = QuantizeTo8Bit(lr);
  return lr;
}

upscale::Upscaler MakeUpscaler(const RunConfig& cfg, const RunContext& ctx, int factor,
                               const std::vector<int>& chain) {
  const UpscaleConfig& u = cfg.upscale;
  std::vector<int> stages = chain;
  if (stages.empty()) {
    stages = {factor};
    if (u.kind == "remote") {
      if (!ctx.backend) throw ConfigError("remote upscaler without a backend endpoint");
      const auto declared = ctx.backend->Capabilities().factors;
      if (std::find(declared.begin(), declared.end(), factor) == declared.end()) {
        stages = ctx.backend->DecomposeFactor(factor);
        if (stages.empty()) {
          throw ConfigError("backend " + ctx.backend->endpoint() + " cannot reach factor " +
                            std::to_string(factor) + " with its declared factors");
        }
      }
    }
  }
  const auto kernel = resample::ParseKernel(u.kernel);
  if (!kernel) throw ConfigError("unknown upscale kernel '" + u.kernel + "'");
  auto stage = [&](int f) {
    if (u.kind == "interp") return upscale::Upscaler::Interp(f, *kernel);
    if (u.kind == "perturbed") return upscale::Upscaler::Perturbed(f, *kernel, u.tau);
    if (u.kind == "remote") return upscale::Upscaler::Remote(ctx.backend, f);
    throw ConfigError("unknown upscaler kind '" + u.kind + "'");
  };
  upscale::Upscaler up = stage(stages.front());
  for (std::size_t k = 1; k < stages.size(); ++k) up = upscale::Upscaler::Chain(up, stage(stages[k]));
  if (up.factor() != factor) {
    throw ConfigError("upscaler factor " + std::to_string(up.factor()) +
                      " does not match downscale factor " + std::to_string(factor));
  }
  return up;
}

ScoreReport IdardScore(const RunConfig& cfg) { return IdardScore(cfg, MakeRunContext(cfg)); }

ScoreReport IdardScore(const RunConfig& cfg, const RunContext& ctx) {
  ValidateRunConfig(cfg);
  const auto wall_start = Clock::now();
  data::Manifest manifest;
  const std::vector<data::ManifestRow> rows = SelectRows(cfg, manifest);
  const upscale::Upscaler up =
      MakeUpscaler(cfg, ctx, cfg.downscale.factor, cfg.upscale.chain);

  ScoreReport report;
  report.n_samples = cfg.samples;
  report.metadata = Metadata(cfg, ctx, up);
  if (cfg.keep_samples && !cfg.out.empty()) {
    std::filesystem::create_directories(cfg.out / "samples");
  }

  struct Slot {
    std::optional<ImageRecord> record;
    std::optional<SkippedImage> skipped;
  };
  std::vector<Slot> slots(rows.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex error_mu;
  std::exception_ptr first_error;

  auto process = [&](std::size_t idx) {
    const data::ManifestRow& row = rows[idx];
    const StreamKey key(cfg.seed, row.id);
    ImageRecord rec;
    rec.id = row.id;
    auto t0 = Clock::now();
    Raster hr;
    try {
      hr = ReadImage(manifest.Resolve(row));
    } catch (const std::exception& e) {
      if (cfg.on_error == OnError::kSkip && IsLoadError(e)) {
        slots[idx].skipped = SkippedImage{row.id, ErrorKind(e), e.what()};
        return;
      }
      throw;
    }
    auto t1 = Clock::now();
    const Raster lr = DownscaleImage(cfg, hr, key);
    auto t2 = Clock::now();
    const std::vector<Raster> samples = up.Samples(lr, cfg.samples, key);
    auto t3 = Clock::now();
    rec.distortions.reserve(samples.size());
    for (const Raster& x_hat : samples) {
      if (!x_hat.SameShape(hr)) {
        throw DimensionError("reconstruction of " + row.id + " has dims " +
                             std::to_string(x_hat.height()) + "x" + std::to_string(x_hat.width()) +
                             ", original is " + std::to_string(hr.height()) + "x" +
                             std::to_string(hr.width()) +
                             " (dims must be divisible by the factor)");
      }
      rec.distortions.push_back(metrics::Distortion(cfg.distortion, hr, x_hat, ctx.backend.get()));
    }
    auto t4 = Clock::now();
    const metrics::MeanStd ms = metrics::ComputeMeanStd(rec.distortions);
    rec.mean = ms.mean;
    rec.spread = ms.std;
    rec.times = {Seconds(t0, t1), Seconds(t1, t2), Seconds(t2, t3), Seconds(t3, t4)};
    if (cfg.keep_samples && !cfg.out.empty()) {
      for (std::size_t i = 0; i < samples.size(); ++i) {
        WriteImage(samples[i], cfg.out / "samples" /
                                   (SafeName(row.id) + "_" + std::to_string(i + 1) + ".png"));
      }
    }
    slots[idx].record = std::move(rec);
  };

  auto worker = [&] {
    while (!stop.load()) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= rows.size()) return;
      try {
        process(idx);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        stop.store(true);
      }
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), std::max<std::size_t>(1, rows.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (Slot& s : slots) {
    if (s.record) report.images.push_back(std::move(*s.record));
    if (s.skipped) report.skipped.push_back(std::move(*s.skipped));
  }
  std::sort(report.images.begin(), report.images.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });
  std::sort(report.skipped.begin(), report.skipped.end(),
            [](const SkippedImage& a, const SkippedImage& b) { return a.id < b.id; });
  for (const ImageRecord& r : report.images) report.stage_totals += r.times;
  Aggregate(report);
  report.aborted = first_error != nullptr;
  report.wall_seconds = Seconds(wall_start, Clock::now());

  if (!cfg.out.empty()) {
    if (report.aborted) {
      try {
        std::rethrow_exception(first_error);
      } catch (const std::exception& e) {
        report.metadata["abort"] = {{"kind", ErrorKind(e)}, {"message", e.what()}};
      }
    }
    WriteReport(report, cfg.out);
  }
  if (first_error) std::rethrow_exception(first_error);
  return report;
}

double Spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    throw InvalidArgument("spearman needs equal lengths, got " + std::to_string(xs.size()) +
                          " and " + std::to_string(ys.size()));
  }
  if (xs.size() < 2) throw InvalidArgument("spearman needs at least two points");
  auto ranks = [](const std::vector<double>& v, const char* which) {
    for (double x : v) {
      if (!std::isfinite(x)) throw InvalidArgument("spearman input contains a non-finite value");
    }
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) {
      throw UndefinedCorrelation(std::string("spearman correlation is undefined: ") + which +
                                 " values are all equal");
    }
    return r;
  };
  const std::vector<double> rx = ranks(xs, "level");
  const std::vector<double> ry = ranks(ys, "score");
  const double n = static_cast<double>(xs.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean, dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

SweepResult Sweep(const RunConfig& cfg) {
  ValidateRunConfig(cfg);
  const SweepConfig& sw = cfg.sweep;
  SweepResult result;
  result.family = sw.family;
  std::vector<double> levels = sw.levels;
  const bool stack = sw.family == "stack";
  if (stack) {
    if (sw.ops.empty()) throw ConfigError("sweep family stack needs sweep.ops");
    if (sw.steps.size() != sw.ops.size()) throw ConfigError("sweep.steps must match sweep.ops");
    const int max_step = *std::max_element(sw.steps.begin(), sw.steps.end());
    if (levels.empty()) {
      for (int k = 1; k <= max_step; ++k) levels.push_back(static_cast<double>(k));
    }
    for (double l : levels) {
      if (l != std::floor(l) || l < 0 || l > static_cast<double>(max_step)) {
        throw ConfigError("stack levels must be steps in [0, " + std::to_string(max_step) + "]");
      }
    }
  } else if (sw.family != "blur" && sw.family != "noise" && sw.family != "contrast" &&
             sw.family != "quantize") {
    throw ConfigError("sweep.family must be blur, noise, contrast, quantize or stack (got '" +
                      sw.family + "')");
  }
  if (levels.size() < 2) throw ConfigError("a sweep needs at least two levels");
  if (std::all_of(levels.begin(), levels.end(), [&](double l) { return l == levels.front(); })) {
    throw UndefinedCorrelation("all sweep levels are equal; rank correlation is undefined");
  }
  const bool up = levels[1] > levels[0];
  for (std::size_t k = 1; k < levels.size(); ++k) {
    if (up ? !(levels[k] > levels[k - 1]) : !(levels[k] < levels[k - 1])) {
      throw ConfigError("sweep levels must be strictly monotone");
    }
  }

  const RunContext ctx = MakeRunContext(cfg);
  std::vector<double> scores;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    RunConfig level_cfg = cfg;
    degrade::DegradationOp op;
    if (stack) {
      for (std::size_t j = 0; j < sw.ops.size(); ++j) {
        if (sw.steps[j] <= levels[k]) level_cfg.degrade.ops.push_back(sw.ops[j]);
      }
    } else {
      if (sw.family == "blur") op = degrade::GaussBlur{levels[k], 3};
      else if (sw.family == "noise") op = degrade::GaussNoise{levels[k], 0};
      else if (sw.family == "contrast") op = degrade::Contrast{levels[k]};
      else {
        if (levels[k] != std::floor(levels[k])) throw ConfigError("quantize levels must be integers");
        op = degrade::QuantizeOtsu{static_cast<int>(levels[k])};
      }
      level_cfg.degrade.ops.push_back(op);
    }
    if (!cfg.out.empty()) level_cfg.out = cfg.out / ("level_" + std::to_string(k));
    SweepLevel level;
    level.level = levels[k];
    level.label = degrade::Describe(level_cfg.degrade);
    level.report = IdardScore(level_cfg, ctx);
    if (!level.report.score) throw ConfigError("sweep level " + level.label + " scored no images");
    scores.push_back(*level.report.score);
    result.levels.push_back(std::move(level));
  }
  result.rho = Spearman(levels, scores);
  if (!cfg.out.empty()) {
    std::filesystem::create_directories(cfg.out);
    std::ofstream(cfg.out / "sweep.json") << SweepToJson(result).dump(2) << "\n";
  }
  return result;
}

SweepResult ScaleSweep(const RunConfig& cfg) {
  const ScaleSweepConfig& ss = cfg.scale_sweep;
  if (ss.factors.size() < 2) throw ConfigError("scale_sweep.factors needs at least two factors");
  SweepResult result;
  result.family = "scale";
  const RunContext ctx = MakeRunContext(cfg);
  std::vector<double> levels, scores;
  for (int f : ss.factors) {
    RunConfig fcfg = cfg;
    fcfg.downscale.factor = f;
    auto it = ss.chains.find(f);
    fcfg.upscale.chain = it == ss.chains.end() ? std::vector<int>{} : it->second;
    if (!cfg.out.empty()) fcfg.out = cfg.out / ("x" + std::to_string(f));
    SweepLevel level;
    level.level = f;
    level.label = "x" + std::to_string(f);
    level.report = IdardScore(fcfg, ctx);
    if (!level.report.score) throw ConfigError("scale " + level.label + " scored no images");
    levels.push_back(f);
    scores.push_back(*level.report.score);
    result.levels.push_back(std::move(level));
  }
  result.rho = Spearman(levels, scores);
  if (!cfg.out.empty()) {
    std::filesystem::create_directories(cfg.out);
    std::ofstream(cfg.out / "sweep.json") << SweepToJson(result).dump(2) << "\n";
  }
  return result;
}

json TimingToJson(const ScoreReport& report) {
  json t;
  const StageTimes& s = report.stage_totals;
  t["cumulative_s"] = {{"load", s.load},
                       {"downscale", s.downscale},
                       {"upscale", s.upscale},
                       {"metric", s.metric},
                       {"total", s.total()}};
  const double n = static_cast<double>(report.images.size());
  auto per = [&](double v) { return n > 0 ? v / n : 0.0; };
  t["per_image_s"] = {{"load", per(s.load)},
                      {"downscale", per(s.downscale)},
                      {"upscale", per(s.upscale)},
                      {"metric", per(s.metric)},
                      {"total", per(s.total())}};
  t["wall_clock_s"] = report.wall_seconds;
  return t;
}

json ReportToJson(const ScoreReport& report) {
  json j;
  j["schema"] = "idard.report/1";
  j["score"] = report.score ? json(*report.score) : json(nullptr);
  j["std"] = report.std;
  j["sample_spread"] = report.sample_spread;
  j["n_images"] = report.images.size();
  j["n_samples"] = report.n_samples;
  j["n_skipped"] = report.skipped.size();
  j["aborted"] = report.aborted;
  json images = json::array();
  for (const ImageRecord& r : report.images) {
    images.push_back({{"id", r.id},
                      {"mean", r.mean},
                      {"spread", r.spread},
                      {"distortions", r.distortions},
                      {"times_s",
                       {{"load", r.times.load},
                        {"downscale", r.times.downscale},
                        {"upscale", r.times.upscale},
                        {"metric", r.times.metric}}}});
  }
  j["images"] = images;
  json skipped = json::array();
  for (const SkippedImage& s : report.skipped) {
    skipped.push_back({{"id", s.id}, {"kind", s.kind}, {"message", s.message}});
  }
  j["skipped"] = skipped;
  j["timing"] = TimingToJson(report);
  j["metadata"] = report.metadata;
  return j;
}

json SweepToJson(const SweepResult& result) {
  json j;
  j["schema"] = "idard.sweep/1";
  j["family"] = result.family;
  j["rho"] = result.rho;
  json levels = json::array();
  for (const SweepLevel& l : result.levels) {
    levels.push_back({{"level", l.level},
                      {"label", l.label},
                      {"score", l.report.score ? json(*l.report.score) : json(nullptr)},
                      {"std", l.report.std},
                      {"sample_spread", l.report.sample_spread},
                      {"n_images", l.report.images.size()},
                      {"upscaler", l.report.metadata.value("upscaler", json::object())},
                      {"timing", TimingToJson(l.report)}});
  }
  j["levels"] = levels;
  return j;
}

std::string FormatSamplesCsv(const ScoreReport& report) {
  std::string out = "image_id,sample,distortion\n";
  for (const ImageRecord& r : report.images) {
    for (std::size_t i = 0; i < r.distortions.size(); ++i) {
      out += CsvField(r.id) + "," + std::to_string(i + 1) + "," + FormatDouble(r.distortions[i]) + "\n";
    }
  }
  return out;
}

void WriteReport(const ScoreReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string csv = FormatSamplesCsv(report);
  WriteFileBytes(dir / "samples.csv",
                 std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
  const std::string js = ReportToJson(report).dump(2) + "\n";
  WriteFileBytes(dir / "report.json",
                 std::span(reinterpret_cast<const std::uint8_t*>(js.data()), js.size()));
}

PersistedSamples ReadSamplesCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "image_id,sample,distortion") {
    throw DecodeError("samples.csv has an unexpected header", 0);
  }
  PersistedSamples out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string id;
    std::size_t pos = 0;
    if (!line.empty() && line[0] == '"') {
      pos = 1;
      while (pos < line.size()) {
        if (line[pos] == '"') {
          if (pos + 1 < line.size() && line[pos + 1] == '"') {
            id += '"';
            pos += 2;
            continue;
          }
          ++pos;
          break;
        }
        id += line[pos++];
      }
      if (pos >= line.size() || line[pos] != ',') {
        throw DecodeError("samples.csv line " + std::to_string(line_no) + " is malformed", 0);
      }
    } else {
      pos = line.find(',');
      if (pos == std::string::npos) {
        throw DecodeError("samples.csv line " + std::to_string(line_no) + " is malformed", 0);
      }
      id = line.substr(0, pos);
    }
    const std::string rest = line.substr(pos + 1);
    const auto comma = rest.find(',');
    if (comma == std::string::npos) {
      throw DecodeError("samples.csv line " + std::to_string(line_no) + " is malformed", 0);
    }
    const double d = std::strtod(rest.c_str() + comma + 1, nullptr);
    if (out.images.empty() || out.images.back().id != id) {
      out.images.push_back(ImageRecord{});
      out.images.back().id = id;
    }
    out.images.back().distortions.push_back(d);
  }
  std::vector<double> means;
  for (ImageRecord& r : out.images) {
    const metrics::MeanStd ms = metrics::ComputeMeanStd(r.distortions);
    r.mean = ms.mean;
    r.spread = ms.std;
    means.push_back(r.mean);
  }
  if (!means.empty()) {
    const metrics::MeanStd ms = metrics::ComputeMeanStd(means);
    out.score = ms.mean;
    out.std = ms.std;
  }
  return out;
}

}  // namespace idard::pipeline
