#include "idard/plugin.h"

#include <stdlib.h>

#include <cerrno>
#include <cstring>
#include <filesystem>

#include "idard/codec.h"
#include "idard/error.h"
#include "idard/process.h"

namespace idard {
namespace {

// Removes the directory tree on scope exit.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "idard-plugin-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) {
      throw IoError(std::string("cannot create temp dir: ") + std::strerror(errno));
    }
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

void ReplaceAll(std::string& s, std::string_view from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

std::string ExpandPluginTemplate(const std::string& tmpl, const std::string& in_path,
                                 const std::string& out_path, int factor) {
  if (tmpl.find("{in}") == std::string::npos || tmpl.find("{out}") == std::string::npos) {
    throw ConfigError("plugin command must contain {in} and {out}: " + tmpl);
  }
  std::string cmd = tmpl;
  ReplaceAll(cmd, "{in}", ShellQuote(in_path));
  ReplaceAll(cmd, "{out}", ShellQuote(out_path));
  ReplaceAll(cmd, "{factor}", std::to_string(factor));
  return cmd;
}

Raster RunPlugin(const PluginDownscaler& plugin, const Raster& img, int factor) {
  if (factor < 1) throw InvalidScale("plugin factor must be >= 1");
  TempDir dir;
  const auto in_path = dir.path() / "in.png";
  const auto out_path = dir.path() / "out.png";
  WriteImage(img, in_path);
  const std::string cmd =
      ExpandPluginTemplate(plugin.command_template, in_path.string(), out_path.string(), factor);
  const RunResult run = RunShell(cmd, plugin.timeout);
  if (run.timed_out) {
    throw PluginError("plugin timed out after " + std::to_string(plugin.timeout.count()) +
                          " ms: " + cmd,
                      run.exit_code, run.stderr_text);
  }
  if (run.exit_code != 0) {
    throw PluginError("plugin exited with code " + std::to_string(run.exit_code) + ": " + cmd,
                      run.exit_code, run.stderr_text);
  }
  Raster out;
  try {
    out = ReadImage(out_path);
  } catch (const Error& e) {
    throw PluginError(std::string("plugin output unreadable: ") + e.what(), run.exit_code,
                      run.stderr_text);
  }
  const int want_h = (img.height() + factor - 1) / factor;
  const int want_w = (img.width() + factor - 1) / factor;
  if (out.height() != want_h || out.width() != want_w || out.channels() != img.channels()) {
    throw PluginError("plugin output has dims " + std::to_string(out.height()) + "x" +
                          std::to_string(out.width()) + "x" + std::to_string(out.channels()) +
                          ", expected " + std::to_string(want_h) + "x" +
                          std::to_string(want_w) + "x" + std::to_string(img.channels()),
                      run.exit_code, run.stderr_text);
  }
  return out;
}

}  // namespace idard
