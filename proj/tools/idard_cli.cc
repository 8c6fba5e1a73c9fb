// idard: command-line front end for the downscaling assessment harness.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "idard/backend.h"
#include "idard/codec.h"
#include "idard/datatools.h"
#include "idard/degrade.h"
#include "idard/error.h"
#include "idard/pipeline.h"
#include "idard/plugin.h"
#include "idard/resample.h"
#include "idard/upscalers.h"

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace idard;

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  bool json = false;
};

void AddCommon(CLI::App* cmd, Common& c, bool with_workers) {
  cmd->add_option("--seed", c.seed, "Global RNG seed");
  if (with_workers) cmd->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--json", c.json, "Machine-readable JSON on stdout");
}

void Emit(const Common& c, const json& j, const std::string& text) {
  if (c.json) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << text;
  }
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json ImageInfo(const Raster& img, const fs::path& path) {
  return {{"output", path.string()},
          {"height", img.height()},
          {"width", img.width()},
          {"channels", img.channels()}};
}

// "blur:sigma=1,ksize=3" -> op.
degrade::DegradationOp ParseOpArg(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  std::map<std::string, double> fields;
  if (colon != std::string::npos) {
    std::stringstream rest(text.substr(colon + 1));
    std::string kv;
    while (std::getline(rest, kv, ',')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("op parameter '" + kv + "' must be key=value");
      try {
        fields[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
      } catch (const std::exception&) {
        throw ConfigError("op parameter '" + kv + "' has a non-numeric value");
      }
    }
  }
  return pipeline::ParseDegradationOp(fields, name);
}

pipeline::RunConfig LoadConfig(const std::string& path, const Common& c) {
  pipeline::RunConfig cfg = pipeline::LoadRunConfig(path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.workers) cfg.workers = *c.workers;
  if (!c.out.empty()) cfg.out = c.out;
  pipeline::ValidateRunConfig(cfg);
  return cfg;
}

std::string ReportText(const pipeline::ScoreReport& r) {
  std::ostringstream out;
  if (r.score) {
    out << "S = " << Fixed(*r.score, 4) << " +- " << Fixed(r.std, 4) << " over "
        << r.images.size() << " images (N_Q = " << r.n_samples
        << ", sample spread " << Fixed(r.sample_spread, 4) << ")\n";
  } else {
    out << "no images scored\n";
  }
  if (!r.skipped.empty()) out << r.skipped.size() << " images skipped\n";
  return out.str();
}

std::string SweepText(const pipeline::SweepResult& s) {
  std::ostringstream out;
  for (const auto& l : s.levels) {
    out << l.label << "\t" << (l.report.score ? Fixed(*l.report.score, 4) : "n/a") << " +- "
        << Fixed(l.report.std, 4) << "\n";
  }
  out << "rho = " << Fixed(s.rho, 4) << "\n";
  return out.str();
}

int Run(int argc, char** argv) {
  CLI::App app{"Score image downscalers by how well their output can be upscaled back"};
  app.require_subcommand(1);
  Common common;

  // downscale
  auto* ds = app.add_subcommand("downscale", "Downscale one image");
  std::string ds_method = "bicubic", ds_plugin, ds_in, ds_out;
  int ds_factor = 8;
  double ds_lambda = resample::kDefaultDpidLambda, ds_timeout = 120.0;
  ds->add_option("--method", ds_method, "nearest|bilinear|bicubic|lanczos3|box|dpid|plugin");
  ds->add_option("--factor", ds_factor, "Integer scale factor")->check(CLI::PositiveNumber);
  ds->add_option("--lambda", ds_lambda, "DPID exponent");
  ds->add_option("--plugin", ds_plugin, "Plugin command template with {in} {out} {factor}");
  ds->add_option("--plugin-timeout", ds_timeout, "Plugin timeout in seconds");
  ds->add_option("input", ds_in)->required();
  ds->add_option("output", ds_out)->required();
  AddCommon(ds, common, false);

  // degrade
  auto* dg = app.add_subcommand("degrade", "Apply a synthetic downscaler (base + degradations)");
  std::vector<std::string> dg_ops;
  std::string dg_order = "after_downscale", dg_base = "bicubic", dg_in, dg_out, dg_id;
  int dg_factor = 1;
  dg->add_option("--op", dg_ops, "Op such as blur:sigma=1,ksize=3 (repeatable, applied in order)");
  dg->add_option("--order", dg_order, "after_downscale|before_downscale");
  dg->add_option("--base", dg_base, "Base downscale kernel");
  dg->add_option("--factor", dg_factor, "Base downscale factor (1 = degrade only)")
      ->check(CLI::PositiveNumber);
  dg->add_option("--id", dg_id, "Image id for the RNG stream (default: input file stem)");
  dg->add_option("input", dg_in)->required();
  dg->add_option("output", dg_out)->required();
  AddCommon(dg, common, false);

  // upscale
  auto* us = app.add_subcommand("upscale", "Draw one upscaled sample");
  std::string us_kind = "perturbed", us_kernel = "bicubic", us_endpoint, us_in, us_out, us_id;
  int us_factor = 8, us_sample = 1;
  double us_tau = upscale::kDefaultTau;
  us->add_option("--kind", us_kind, "interp|perturbed|remote");
  us->add_option("--kernel", us_kernel, "Interpolation kernel");
  us->add_option("--tau", us_tau, "Perturbation amplitude");
  us->add_option("--endpoint", us_endpoint, "Backend endpoint for kind remote");
  us->add_option("--factor", us_factor, "Scale factor")->check(CLI::PositiveNumber);
  us->add_option("--sample", us_sample, "Sample index i >= 1")->check(CLI::PositiveNumber);
  us->add_option("--id", us_id, "Image id for the RNG stream (default: input file stem)");
  us->add_option("input", us_in)->required();
  us->add_option("output", us_out)->required();
  AddCommon(us, common, false);

  // score / sweep / scale-sweep
  std::string config;
  auto* sc = app.add_subcommand("score", "Run the estimator for one configuration");
  sc->add_option("--config", config, "TOML run config")->required();
  sc->add_option("--out", common.out, "Output directory (overrides run.out)");
  AddCommon(sc, common, true);
  auto* sw = app.add_subcommand("sweep", "Score every level of a degradation sweep");
  sw->add_option("--config", config, "TOML run config")->required();
  sw->add_option("--out", common.out, "Output directory (overrides run.out)");
  AddCommon(sw, common, true);
  auto* ss = app.add_subcommand("scale-sweep", "Score every factor of a scale sweep");
  ss->add_option("--config", config, "TOML run config")->required();
  ss->add_option("--out", common.out, "Output directory (overrides run.out)");
  AddCommon(ss, common, true);

  // balance / entropy
  std::string manifest;
  auto* bl = app.add_subcommand("balance", "Select a label-balanced subset of a manifest");
  std::int64_t bl_n = 0;
  bl->add_option("--manifest", manifest, "Manifest CSV")->required();
  bl->add_option("--n", bl_n, "Subset size")->required();
  bl->add_option("--out", common.out, "Subset manifest to write")->required();
  AddCommon(bl, common, false);
  auto* en = app.add_subcommand("entropy", "Joint entropy of a manifest's label cells");
  en->add_option("--manifest", manifest, "Manifest CSV")->required();
  AddCommon(en, common, false);

  // report
  auto* rp = app.add_subcommand("report", "Summarise a report directory");
  std::string rp_dir;
  rp->add_option("dir", rp_dir, "Directory holding report.json and samples.csv")->required();
  AddCommon(rp, common, false);

  // make-probes
  auto* mp = app.add_subcommand("make-probes", "Write a synthetic probe image set");
  int mp_count = 30, mp_size = 256;
  mp->add_option("--count", mp_count, "Number of images")->check(CLI::NonNegativeNumber);
  mp->add_option("--size", mp_size, "Square image size")->check(CLI::PositiveNumber);
  mp->add_option("--out", common.out, "Output directory")->required();
  AddCommon(mp, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::uint64_t seed = common.seed.value_or(0);

  if (*ds) {
    const Raster img = ReadImage(ds_in);
    Raster out;
    if (ds_method == "plugin") {
      out = RunPlugin({ds_plugin, std::chrono::milliseconds(static_cast<std::int64_t>(ds_timeout * 1000))},
                      img, ds_factor);
    } else if (ds_method == "dpid") {
      out = resample::DpidDownscale(img, ds_factor, ds_lambda);
    } else {
      const auto kernel = resample::ParseKernel(ds_method);
      if (!kernel) throw ConfigError("unknown downscale method '" + ds_method + "'");
      out = resample::Downscale(img, ds_factor, *kernel);
    }
    WriteImage(out, ds_out);
    json j = ImageInfo(out, ds_out);
    j["method"] = ds_method;
    j["factor"] = ds_factor;
    Emit(common, j, ds_out + ": " + std::to_string(out.height()) + "x" + std::to_string(out.width()) + "\n");
    return 0;
  }

  if (*dg) {
    degrade::SyntheticDownscaler synth;
    const auto kernel = resample::ParseKernel(dg_base);
    if (!kernel) throw ConfigError("unknown base kernel '" + dg_base + "'");
    synth.base = *kernel;
    synth.factor = dg_factor;
    for (const auto& op : dg_ops) synth.spec.ops.push_back(ParseOpArg(op));
    if (dg_order == "after_downscale") synth.spec.order = degrade::Order::kAfterDownscale;
    else if (dg_order == "before_downscale") synth.spec.order = degrade::Order::kBeforeDownscale;
    else throw ConfigError("--order must be after_downscale or before_downscale");
    degrade::Validate(synth.spec);
    const std::string id = dg_id.empty() ? fs::path(dg_in).stem().string() : dg_id;
    const Raster out = synth(ReadImage(dg_in), StreamKey(seed, id));
    WriteImage(out, dg_out);
    json j = ImageInfo(out, dg_out);
    j["degradation"] = degrade::Describe(synth.spec);
    j["base"] = dg_base;
    j["factor"] = dg_factor;
    j["seed"] = seed;
    j["image_id"] = id;
    Emit(common, j, dg_out + ": " + degrade::Describe(synth.spec) + "\n");
    return 0;
  }

  if (*us) {
    const auto kernel = resample::ParseKernel(us_kernel);
    if (!kernel) throw ConfigError("unknown kernel '" + us_kernel + "'");
    std::optional<upscale::Upscaler> up;
    if (us_kind == "interp") {
      up = upscale::Upscaler::Interp(us_factor, *kernel);
    } else if (us_kind == "perturbed") {
      up = upscale::Upscaler::Perturbed(us_factor, *kernel, us_tau);
    } else if (us_kind == "remote") {
      up = upscale::Upscaler::Remote(std::make_shared<Backend>(EndpointSpec::Parse(us_endpoint)),
                                     us_factor);
    } else {
      throw ConfigError("--kind must be interp, perturbed or remote");
    }
    const std::string id = us_id.empty() ? fs::path(us_in).stem().string() : us_id;
    const Raster out = up->Sample(ReadImage(us_in), us_sample, StreamKey(seed, id));
    WriteImage(out, us_out);
    json j = ImageInfo(out, us_out);
    j["upscaler"] = up->Describe();
    j["sample"] = us_sample;
    j["seed"] = seed;
    j["image_id"] = id;
    Emit(common, j, us_out + ": " + up->Describe() + " sample " + std::to_string(us_sample) + "\n");
    return 0;
  }

  if (*sc) {
    const pipeline::ScoreReport r = pipeline::IdardScore(LoadConfig(config, common));
    Emit(common, pipeline::ReportToJson(r), ReportText(r));
    return 0;
  }
  if (*sw) {
    const pipeline::SweepResult r = pipeline::Sweep(LoadConfig(config, common));
    Emit(common, pipeline::SweepToJson(r), SweepText(r));
    return 0;
  }
  if (*ss) {
    const pipeline::SweepResult r = pipeline::ScaleSweep(LoadConfig(config, common));
    Emit(common, pipeline::SweepToJson(r), SweepText(r));
    return 0;
  }

  if (*bl) {
    const data::Manifest m = data::ReadManifest(manifest);
    data::BalanceResult r = data::BalanceSubset(m, bl_n, seed);
    // Paths in the written subset stay valid relative to its new location.
    const fs::path out_path = fs::absolute(common.out);
    for (auto& row : r.subset.rows) {
      const fs::path resolved = fs::absolute(m.Resolve(row));
      row.path = resolved.lexically_relative(out_path.parent_path()).string();
    }
    fs::create_directories(out_path.parent_path());
    data::WriteManifest(r.subset, out_path);
    const double h = r.subset.rows.empty() ? 0.0 : data::JointEntropy(data::CountCells(r.subset));
    json meta = {{"source", manifest},
                 {"n", bl_n},
                 {"seed", seed},
                 {"size", r.subset.rows.size()},
                 {"joint_entropy", h},
                 {"available", r.available},
                 {"quota", r.quota},
                 {"selected", r.selected},
                 {"spilled", r.spilled},
                 {"cell_order", "age-major: age*6 + ethnicity*2 + gender"}};
    std::ofstream(out_path.string() + ".meta.json") << meta.dump(2) << "\n";
    Emit(common, meta,
         std::to_string(r.subset.rows.size()) + " rows written to " + common.out +
             ", joint entropy " + Fixed(h, 4) + "\n");
    return 0;
  }

  if (*en) {
    const data::Manifest m = data::ReadManifest(manifest);
    const data::CellTable cells = data::CountCells(m);
    const double h = data::JointEntropy(cells);
    std::int64_t labeled = 0;
    for (auto c : cells) labeled += c;
    json j = {{"joint_entropy", h},
              {"labeled", labeled},
              {"rows", m.rows.size()},
              {"cells", cells}};
    Emit(common, j, Fixed(h, 4) + "\n");
    return 0;
  }

  if (*rp) {
    const fs::path dir(rp_dir);
    const pipeline::PersistedSamples p = pipeline::ReadSamplesCsv(dir / "samples.csv");
    std::ifstream in(dir / "report.json");
    if (!in) throw IoError("cannot read " + (dir / "report.json").string());
    json stored;
    try {
      stored = json::parse(in);
    } catch (const json::exception& e) {
      throw DecodeError(std::string("report.json: ") + e.what(), 0);
    }
    const json stored_score = stored.value("score", json(nullptr));
    const bool consistent =
        (stored_score.is_null() && !p.score) ||
        (stored_score.is_number() && p.score && stored_score.get<double>() == *p.score);
    json j = {{"score", p.score ? json(*p.score) : json(nullptr)},
              {"std", p.std},
              {"n_images", p.images.size()},
              {"stored_score", stored_score},
              {"consistent", consistent},
              {"timing", stored.value("timing", json::object())},
              {"metadata", stored.value("metadata", json::object())}};
    std::string text = p.score ? "S = " + Fixed(*p.score, 4) + " +- " + Fixed(p.std, 4) + " over " +
                                     std::to_string(p.images.size()) + " images"
                               : std::string("no images");
    text += consistent ? " (matches report.json)\n" : " (DIFFERS from report.json)\n";
    Emit(common, j, text);
    return consistent ? 0 : 1;
  }

  if (*mp) {
    const data::Manifest m = data::WriteProbeSet(common.out, mp_count, mp_size, seed);
    json j = {{"dir", common.out},
              {"count", m.rows.size()},
              {"size", mp_size},
              {"seed", seed},
              {"manifest", (fs::path(common.out) / "manifest.csv").string()}};
    Emit(common, j, std::to_string(m.rows.size()) + " probes written to " + common.out + "\n");
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return Run(argc, argv);
  } catch (const idard::Error& e) {
    std::cerr << json{{"error", {{"kind", e.kind()}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
}
