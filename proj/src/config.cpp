#include "fvmatch/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace fvmatch {

namespace {

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str(), path);
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_number) + ": expected key=value, got '" +
                        line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(line_number) + ": empty key");
    if (cfg.entries_.count(key))
      throw ConfigError(origin + ": duplicate key '" + key + "'");
    cfg.entries_[key] = value;
  }
  return cfg;
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KeyValueConfig::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(origin_ + ": missing required field '" + key + "'");
  consumed_[key] = true;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  consumed_[key] = true;
  return it->second;
}

double KeyValueConfig::get_double(const std::string& key) const {
  const std::string text = get_string(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": field '" + key + "' is not a number: '" + text + "'");
  }
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  return get_double(key);
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  const double v = get_double(key);
  if (v != std::floor(v))
    throw ConfigError(origin_ + ": field '" + key + "' must be an integer");
  return static_cast<int>(v);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(origin_ + ": field '" + key + "' is not a boolean: '" + v + "'");
}

std::map<std::string, double> KeyValueConfig::numeric_section(
    const std::string& prefix, const std::vector<std::string>& skip) const {
  std::map<std::string, double> out;
  const std::string full = prefix + ".";
  for (const auto& [key, value] : entries_) {
    if (key.rfind(full, 0) != 0) continue;
    const std::string name = key.substr(full.size());
    bool skipped = false;
    for (const std::string& s : skip)
      if (s == name) skipped = true;
    if (skipped) continue;
    out[name] = get_double(key);
  }
  return out;
}

void KeyValueConfig::check_all_consumed() const {
  for (const auto& [key, value] : entries_)
    if (!consumed_.count(key))
      throw ConfigError(origin_ + ": unknown field '" + key + "'");
}

ModelVariant parse_variant(const std::string& name) {
  if (name == "l2" || name == "L2") return ModelVariant::L2;
  if (name == "h1" || name == "H1") return ModelVariant::H1;
  if (name == "bv" || name == "BV") return ModelVariant::BV;
  throw ConfigError("field 'model.variant' must be one of l2, h1, bv; got '" + name + "'");
}

SurfaceSpec surface_spec_from(const KeyValueConfig& kv, const std::string& prefix) {
  SurfaceSpec spec;
  const std::string name = kv.get_string(prefix + ".surface");
  const auto params = kv.numeric_section(prefix, {"surface", "signal"});
  std::shared_ptr<AnalyticSurface> surface = builtin_surface(name, params);
  spec.signal_text = kv.get_string(prefix + ".signal", "0");
  auto expr = std::make_shared<SignalExpr>(spec.signal_text);
  auto raw = surface;
  spec.signal = [expr, raw](double u, double v) {
    const Vec3 p = raw->position(u, v);
    return expr->eval(u, v, p.x(), p.y(), p.z());
  };
  spec.surface = std::move(surface);
  return spec;
}

RunConfig RunConfig::load(const std::string& path) {
  return from_kv(KeyValueConfig::parse_file(path));
}

RunConfig RunConfig::from_kv(const KeyValueConfig& kv) {
  RunConfig cfg;
  cfg.model.variant = parse_variant(kv.get_string("model.variant", "l2"));
  cfg.model.alpha = kv.get_double("model.alpha", 1.0);
  cfg.model.beta = kv.get_double("model.beta", 0.0);
  cfg.model.gamma_w = kv.get_double("model.gamma_w", 1.0);
  cfg.model.epsilon = kv.get_double("model.epsilon", 1e-3);
  cfg.model.kernel = KernelParams(kv.get_double("kernel.sigma_e", 0.5),
                                  kv.get_double("kernel.sigma_t", 1.0),
                                  kv.get_double("kernel.sigma_f", 1.0));
  cfg.model.validate();

  cfg.descent.max_iters = kv.get_int("descent.max_iters", 2000);
  cfg.descent.grad_tol = kv.get_double("descent.grad_tol", 1e-8);
  cfg.descent.initial_step = kv.get_double("descent.initial_step", 1.0);
  cfg.descent.shrink = kv.get_double("descent.shrink", 0.5);
  cfg.descent.grow = kv.get_double("descent.grow", 1.3);
  cfg.descent.armijo = kv.get_double("descent.armijo", 1e-4);
  if (!(cfg.descent.shrink > 0.0 && cfg.descent.shrink < 1.0))
    throw ConfigError("field 'descent.shrink' must lie in (0,1)");
  if (!(cfg.descent.grow >= 1.0)) throw ConfigError("field 'descent.grow' must be >= 1");
  if (!(cfg.descent.initial_step > 0.0))
    throw ConfigError("field 'descent.initial_step' must be positive");
  if (cfg.descent.max_iters < 0) throw ConfigError("field 'descent.max_iters' must be >= 0");

  if (kv.has("source.surface")) cfg.source = surface_spec_from(kv, "source");
  if (kv.has("target.surface")) cfg.target = surface_spec_from(kv, "target");

  const int levels = kv.get_int("gamma.levels", 0);
  if (levels > 0) {
    const double h0 = kv.get_double("gamma.h0", 0.3);
    const double ratio = kv.get_double("gamma.ratio", 0.5);
    if (!(h0 > 0.0)) throw ConfigError("field 'gamma.h0' must be positive");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("field 'gamma.ratio' must lie in (0,1)");
    double h = h0;
    for (int i = 0; i < levels; ++i) {
      cfg.gamma.hs.push_back(h);
      h *= ratio;
    }
  }
  cfg.gamma.options.lift_order = kv.get_int("gamma.lift_order", 20);
  cfg.gamma.options.with_oracle = kv.get_bool("gamma.oracle", true);
  cfg.gamma.options.validate_admissibility = kv.get_bool("gamma.validate", false);

  cfg.output_dir = kv.get_string("output.dir", ".");
  cfg.seed = static_cast<unsigned long>(kv.get_double("seed", 0.0));
  cfg.threads = kv.get_int("threads", 0);
  kv.check_all_consumed();
  return cfg;
}

}  // namespace fvmatch
