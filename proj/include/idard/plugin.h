#pragma once

#include <chrono>
#include <string>

#include "idard/image.h"

namespace idard {

// External downscaler run as a shell command. The template must contain
// {in} and {out}; {factor} is optional. Paths are substituted shell-quoted.
struct PluginDownscaler {
  std::string command_template;
  std::chrono::milliseconds timeout = std::chrono::seconds(120);
};

// Throws ConfigError when {in} or {out} is missing.
std::string ExpandPluginTemplate(const std::string& tmpl, const std::string& in_path,
                                 const std::string& out_path, int factor);

// Writes `img` to a temporary PNG, runs the plugin and decodes its output.
// Nonzero exit, timeout, an unreadable output or dims other than
// ceil(h/s) x ceil(w/s) x c raise PluginError with the captured stderr.
Raster RunPlugin(const PluginDownscaler& plugin, const Raster& img, int factor);

}  // namespace idard
