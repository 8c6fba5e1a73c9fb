#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "idard/backend.h"
#include "idard/error.h"
#include "idard/pipeline.h"

namespace idard::pipeline {
namespace {

using Path = std::filesystem::path;

class Table {
 public:
  Table(const toml::table* t, std::string name) : t_(t), name_(std::move(name)) {}

  bool present() const { return t_ != nullptr; }

  // Rejects keys outside `allowed`.
  void Allow(std::initializer_list<std::string_view> allowed) const {
    if (!t_) return;
    std::set<std::string_view> ok(allowed);
    for (const auto& [k, v] : *t_) {
      if (!ok.count(k.str())) {
        throw ConfigError("unknown key '" + std::string(k.str()) + "' in [" + name_ + "]");
      }
    }
  }

  template <typename T>
  std::optional<T> Get(std::string_view key) const {
    if (!t_) return std::nullopt;
    const toml::node* n = t_->get(key);
    if (!n) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = n->value<double>()) return *v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (n->is_boolean()) return n->value<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (n->is_string()) return n->value<std::string>();
    } else {
      if (n->is_integer()) {
        const std::int64_t v = *n->value<std::int64_t>();
        if constexpr (std::is_same_v<T, std::uint64_t>) {
          if (v < 0) throw ConfigError(Where(key) + " must be nonnegative");
        }
        return static_cast<T>(v);
      }
    }
    throw ConfigError(Where(key) + " has the wrong type");
  }

  const toml::array* Array(std::string_view key) const {
    if (!t_) return nullptr;
    const toml::node* n = t_->get(key);
    if (!n) return nullptr;
    if (!n->is_array()) throw ConfigError(Where(key) + " must be an array");
    return n->as_array();
  }

  std::string Where(std::string_view key) const { return name_ + "." + std::string(key); }

 private:
  const toml::table* t_;
  std::string name_;
};

Table Sub(const toml::table& root, std::string_view name) {
  const toml::node* n = root.get(name);
  if (n && !n->is_table()) throw ConfigError("[" + std::string(name) + "] must be a table");
  return Table(n ? n->as_table() : nullptr, std::string(name));
}

std::vector<double> Numbers(const toml::array* arr, const std::string& where) {
  std::vector<double> out;
  if (!arr) return out;
  for (const auto& el : *arr) {
    auto v = el.value<double>();
    if (!v) throw ConfigError(where + " must contain numbers");
    out.push_back(*v);
  }
  return out;
}

std::vector<int> Ints(const toml::array* arr, const std::string& where) {
  std::vector<int> out;
  if (!arr) return out;
  for (const auto& el : *arr) {
    if (!el.is_integer()) throw ConfigError(where + " must contain integers");
    out.push_back(static_cast<int>(*el.value<std::int64_t>()));
  }
  return out;
}

degrade::DegradationOp OpFromToml(const toml::node& node, const std::string& where,
                                  std::optional<int>* step = nullptr) {
  const toml::table* t = node.as_table();
  if (!t) throw ConfigError(where + " entries must be tables like {op = \"blur\", sigma = 1.0}");
  std::string op;
  std::map<std::string, double> fields;
  for (const auto& [k, v] : *t) {
    if (k.str() == "op") {
      if (!v.is_string()) throw ConfigError(where + ".op must be a string");
      op = *v.value<std::string>();
    } else if (step != nullptr && k.str() == "step") {
      if (!v.is_integer()) throw ConfigError(where + ".step must be an integer");
      *step = static_cast<int>(*v.value<std::int64_t>());
    } else {
      auto d = v.value<double>();
      if (!d) throw ConfigError(where + "." + std::string(k.str()) + " must be a number");
      fields[std::string(k.str())] = *d;
    }
  }
  if (op.empty()) throw ConfigError(where + " entry is missing op");
  return ParseDegradationOp(fields, op);
}

std::vector<degrade::DegradationOp> OpsFromToml(const toml::array* arr, const std::string& where) {
  std::vector<degrade::DegradationOp> ops;
  if (!arr) return ops;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    ops.push_back(OpFromToml(*arr->get(i), where + "[" + std::to_string(i) + "]"));
  }
  return ops;
}

Path Resolve(const Path& base, const std::string& p) {
  Path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

}  // namespace

degrade::DegradationOp ParseDegradationOp(const std::map<std::string, double>& fields,
                                          const std::string& op) {
  auto get = [&](std::string_view key, double fallback) {
    auto it = fields.find(std::string(key));
    return it == fields.end() ? fallback : it->second;
  };
  auto only = [&](std::initializer_list<std::string_view> keys) {
    std::set<std::string_view> ok(keys);
    for (const auto& [k, v] : fields) {
      if (!ok.count(k)) throw ConfigError("unknown parameter '" + k + "' for op " + op);
    }
  };
  auto as_int = [&](std::string_view key, double v) {
    if (v != std::floor(v)) {
      throw ConfigError("parameter " + std::string(key) + " of op " + op + " must be an integer");
    }
    return static_cast<int>(v);
  };
  if (op == "blur" || op == "gauss_blur") {
    only({"sigma", "ksize"});
    return degrade::GaussBlur{get("sigma", 1.0), as_int("ksize", get("ksize", 3))};
  }
  if (op == "noise" || op == "gauss_noise") {
    only({"sigma", "seed_salt"});
    return degrade::GaussNoise{get("sigma", 0.0),
                               static_cast<std::uint64_t>(as_int("seed_salt", get("seed_salt", 0)))};
  }
  if (op == "contrast") {
    only({"c"});
    return degrade::Contrast{get("c", 1.0)};
  }
  if (op == "quantize" || op == "quantize_otsu") {
    only({"thresholds", "n_thresholds"});
    const double n = get("thresholds", get("n_thresholds", 1));
    return degrade::QuantizeOtsu{as_int("thresholds", n)};
  }
  throw ConfigError("unknown degradation op '" + op + "'");
}

RunConfig ParseRunConfig(std::string_view toml_text, const Path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw ConfigError("run config: " + std::string(e.description()) + " at line " +
                      std::to_string(e.source().begin.line));
  }
  for (const auto& [k, v] : root) {
    static const std::set<std::string_view> kTables = {
        "dataset", "downscale", "degrade", "upscale", "distortion", "run", "sweep", "scale_sweep"};
    if (!kTables.count(k.str())) {
      throw ConfigError("unknown table [" + std::string(k.str()) + "] in run config");
    }
  }

  RunConfig cfg;
  const Table dataset = Sub(root, "dataset");
  dataset.Allow({"manifest", "limit", "on_error"});
  if (auto m = dataset.Get<std::string>("manifest")) cfg.manifest = Resolve(base_dir, *m);
  if (auto l = dataset.Get<int>("limit")) cfg.limit = *l;
  if (auto e = dataset.Get<std::string>("on_error")) {
    if (*e == "abort") cfg.on_error = OnError::kAbort;
    else if (*e == "skip") cfg.on_error = OnError::kSkip;
    else throw ConfigError("dataset.on_error must be abort or skip");
  }

  const Table ds = Sub(root, "downscale");
  ds.Allow({"method", "factor", "lambda", "plugin", "plugin_timeout", "quantize"});
  if (auto v = ds.Get<std::string>("method")) cfg.downscale.method = *v;
  if (auto v = ds.Get<int>("factor")) cfg.downscale.factor = *v;
  if (auto v = ds.Get<double>("lambda")) cfg.downscale.lambda = *v;
  if (auto v = ds.Get<std::string>("plugin")) cfg.downscale.plugin = *v;
  if (auto v = ds.Get<double>("plugin_timeout")) cfg.downscale.plugin_timeout_s = *v;
  if (auto v = ds.Get<bool>("quantize")) cfg.downscale.quantize = *v;

  const Table dg = Sub(root, "degrade");
  dg.Allow({"order", "ops"});
  if (auto v = dg.Get<std::string>("order")) {
    if (*v == "after_downscale") cfg.degrade.order = degrade::Order::kAfterDownscale;
    else if (*v == "before_downscale") cfg.degrade.order = degrade::Order::kBeforeDownscale;
    else throw ConfigError("degrade.order must be after_downscale or before_downscale");
  }
  cfg.degrade.ops = OpsFromToml(dg.Array("ops"), "degrade.ops");

  const Table us = Sub(root, "upscale");
  us.Allow({"kind", "kernel", "tau", "endpoint", "chain"});
  if (auto v = us.Get<std::string>("kind")) cfg.upscale.kind = *v;
  if (auto v = us.Get<std::string>("kernel")) cfg.upscale.kernel = *v;
  if (auto v = us.Get<double>("tau")) cfg.upscale.tau = *v;
  if (auto v = us.Get<std::string>("endpoint")) cfg.upscale.endpoint = *v;
  cfg.upscale.chain = Ints(us.Array("chain"), "upscale.chain");

  const Table dist = Sub(root, "distortion");
  dist.Allow({"kind"});
  if (auto v = dist.Get<std::string>("kind")) {
    auto kind = metrics::ParseDistortion(*v);
    if (!kind) throw ConfigError("unknown distortion kind '" + *v + "'");
    cfg.distortion = *kind;
  }

  const Table run = Sub(root, "run");
  run.Allow({"samples", "seed", "workers", "keep_samples", "out"});
  if (auto v = run.Get<int>("samples")) cfg.samples = *v;
  if (auto v = run.Get<std::uint64_t>("seed")) cfg.seed = *v;
  if (auto v = run.Get<int>("workers")) cfg.workers = *v;
  if (auto v = run.Get<bool>("keep_samples")) cfg.keep_samples = *v;
  if (auto v = run.Get<std::string>("out")) cfg.out = Resolve(base_dir, *v);

  const Table sw = Sub(root, "sweep");
  sw.Allow({"family", "levels", "ops"});
  if (auto v = sw.Get<std::string>("family")) cfg.sweep.family = *v;
  cfg.sweep.levels = Numbers(sw.Array("levels"), "sweep.levels");
  if (const toml::array* ops = sw.Array("ops")) {
    for (std::size_t i = 0; i < ops->size(); ++i) {
      std::optional<int> step;
      cfg.sweep.ops.push_back(
          OpFromToml(*ops->get(i), "sweep.ops[" + std::to_string(i) + "]", &step));
      const int s = step.value_or(static_cast<int>(i) + 1);
      if (s < 1) throw ConfigError("sweep.ops[" + std::to_string(i) + "].step must be >= 1");
      cfg.sweep.steps.push_back(s);
    }
  }

  const Table ss = Sub(root, "scale_sweep");
  ss.Allow({"factors", "chains"});
  cfg.scale_sweep.factors = Ints(ss.Array("factors"), "scale_sweep.factors");
  if (ss.present()) {
    const toml::node* chains = root["scale_sweep"].as_table()->get("chains");
    if (chains) {
      if (!chains->is_table()) throw ConfigError("scale_sweep.chains must be a table");
      for (const auto& [k, v] : *chains->as_table()) {
        int factor = 0;
        try {
          factor = std::stoi(std::string(k.str()));
        } catch (const std::exception&) {
          throw ConfigError("scale_sweep.chains keys must be factors, got '" +
                            std::string(k.str()) + "'");
        }
        if (!v.is_array()) throw ConfigError("scale_sweep.chains values must be arrays");
        cfg.scale_sweep.chains[factor] =
            Ints(v.as_array(), "scale_sweep.chains." + std::string(k.str()));
      }
    }
  }
  ValidateRunConfig(cfg);
  return cfg;
}

RunConfig LoadRunConfig(const Path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read run config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseRunConfig(buf.str(), path.parent_path());
}

void ValidateRunConfig(const RunConfig& cfg) {
  if (cfg.samples < 1) throw ConfigError("run.samples (N_Q) must be >= 1");
  if (cfg.workers < 1) throw ConfigError("run.workers must be >= 1");
  if (cfg.limit && *cfg.limit < 1) throw ConfigError("dataset.limit must be >= 1");
  if (cfg.downscale.factor < 1) throw ConfigError("downscale.factor must be >= 1");
  const std::string& m = cfg.downscale.method;
  if (m == "plugin") {
    if (cfg.downscale.plugin.empty()) throw ConfigError("downscale.plugin is required for method plugin");
    if (!(cfg.downscale.plugin_timeout_s > 0)) throw ConfigError("downscale.plugin_timeout must be > 0");
  } else if (m == "dpid") {
    if (!(cfg.downscale.lambda >= 0)) throw ConfigError("downscale.lambda must be >= 0");
  } else if (!resample::ParseKernel(m)) {
    throw ConfigError("unknown downscale method '" + m + "'");
  }
  try {
    degrade::Validate(cfg.degrade);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("degrade: ") + e.what());
  }
  const std::string& k = cfg.upscale.kind;
  if (k != "interp" && k != "perturbed" && k != "remote") {
    throw ConfigError("upscale.kind must be interp, perturbed or remote");
  }
  if (!resample::ParseKernel(cfg.upscale.kernel)) {
    throw ConfigError("unknown upscale kernel '" + cfg.upscale.kernel + "'");
  }
  if (!(cfg.upscale.tau >= 0)) throw ConfigError("upscale.tau must be >= 0");
  const bool needs_backend =
      k == "remote" || cfg.distortion == metrics::DistortionKind::kLpipsRemote;
  if (needs_backend) {
    if (cfg.upscale.endpoint.empty()) throw ConfigError("upscale.endpoint is required");
    EndpointSpec::Parse(cfg.upscale.endpoint);
  }
  if (!cfg.upscale.chain.empty()) {
    int product = 1;
    for (int f : cfg.upscale.chain) {
      if (f < 1) throw ConfigError("upscale.chain factors must be >= 1");
      product *= f;
    }
    if (product != cfg.downscale.factor) {
      throw ConfigError("upscale.chain product " + std::to_string(product) +
                        " differs from downscale.factor " + std::to_string(cfg.downscale.factor));
    }
  }
  if (!metrics::IsDistortion(cfg.distortion)) {
    throw ConfigError("distortion kind '" + std::string(metrics::DistortionName(cfg.distortion)) +
                      "' is a similarity; use one_minus_msssim or lpips_remote");
  }
  for (const auto& [factor, stages] : cfg.scale_sweep.chains) {
    int product = 1;
    for (int f : stages) product *= f;
    if (product != factor || stages.empty()) {
      throw ConfigError("scale_sweep.chains." + std::to_string(factor) +
                        " stages do not multiply to the factor");
    }
  }
  for (int f : cfg.scale_sweep.factors) {
    if (f < 1) throw ConfigError("scale_sweep.factors must be >= 1");
  }
}

}  // namespace idard::pipeline
