#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fvmatch/expr.hpp"
#include "fvmatch/matching.hpp"
#include "fvmatch/surface.hpp"

namespace fvmatch {

/// Flat key=value file with one dotted section level (kernel.sigma_e=0.3).
/// '#' starts a comment. Typed getters throw ConfigError naming the field.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text, const std::string& origin = "config");

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Keys under `prefix.` that have numeric values, with the prefix stripped.
  std::map<std::string, double> numeric_section(const std::string& prefix,
                                                const std::vector<std::string>& skip = {}) const;

  /// Throws ConfigError if any key was never read by one of the getters.
  void check_all_consumed() const;

 private:
  std::map<std::string, std::string> entries_;
  mutable std::map<std::string, bool> consumed_;
  std::string origin_;
};

struct SurfaceSpec {
  std::shared_ptr<AnalyticSurface> surface;
  AnalyticSignal signal;  // from the signal expression
  std::string signal_text;
};

struct GammaSettings {
  std::vector<double> hs;
  GammaOptions options;
};

/// Everything a run needs: model + kernel, descent settings, the two
/// surfaces with their signal expressions, refinement levels, output
/// directory, seed, threads.
struct RunConfig {
  EnergyModel model;
  DescentConfig descent;
  std::optional<SurfaceSpec> source;
  std::optional<SurfaceSpec> target;
  GammaSettings gamma;
  std::string output_dir = ".";
  unsigned long seed = 0;
  int threads = 0;  // 0 = library default

  static RunConfig load(const std::string& path);
  static RunConfig from_kv(const KeyValueConfig& kv);
};

/// Surface assembled from a config section: name from `<prefix>.surface`,
/// numeric keys forwarded as parameters, `<prefix>.signal` parsed as an
/// expression of u,v,x,y,z.
SurfaceSpec surface_spec_from(const KeyValueConfig& kv, const std::string& prefix);

ModelVariant parse_variant(const std::string& name);

}  // namespace fvmatch
