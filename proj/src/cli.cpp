#include "fvmatch/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fvmatch/config.hpp"
#include "fvmatch/io.hpp"
#include "fvmatch/matching.hpp"
#include "fvmatch/parallel.hpp"
#include "fvmatch/surface.hpp"

namespace fvmatch {

namespace {

std::map<std::string, double> parse_params(const std::vector<std::string>& raw) {
  std::map<std::string, double> out;
  for (const std::string& item : raw) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("surface parameter '" + item + "' is not of the form key=value");
    const std::string key = item.substr(0, eq);
    try {
      out[key] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("surface parameter '" + key + "' has a non-numeric value");
    }
  }
  return out;
}

BuiltFShape load_built(const std::string& path) { return build_fshape(load_fshape(path)); }

MatchProblem make_problem(const RunConfig& cfg, const BuiltFShape& source,
                          const BuiltFShape& target) {
  const ElementKind required = element_for(cfg.model.variant);
  if (source.element != required)
    throw ValidationError("source fshape uses " +
                          std::string(source.element == ElementKind::P0 ? "face" : "vertex") +
                          " signals but the " +
                          (cfg.model.variant == ModelVariant::L2 ? "l2" : "h1/bv") +
                          " model needs " + (required == ElementKind::P0 ? "face" : "vertex") +
                          " signals");
  DiscreteVarifold nu = target.element == ElementKind::P0
                            ? from_fshape(SignalP0(*target.mesh, target.signal))
                            : from_fshape(SignalP1(*target.mesh, target.signal));
  return MatchProblem(*source.mesh, required, std::move(nu), cfg.model, source.signal);
}

void write_trace_csv(const std::string& path, const DescentTrace& trace) {
  std::vector<std::vector<double>> rows;
  rows.reserve(trace.records.size());
  for (const DescentRecord& r : trace.records)
    rows.push_back({static_cast<double>(r.iteration), r.energy,
                    r.terms.volume + r.terms.gradient, r.terms.varifold, r.grad_inf, r.step});
  save_csv(path, {"iteration", "E_total", "E_penalty", "E_var", "grad_inf", "step"}, rows);
}

int cmd_match(const std::string& source_path, const std::string& target_path,
              const std::string& config_path, const std::string& out_dir) {
  const RunConfig cfg = RunConfig::load(config_path);
  if (cfg.threads > 0) set_num_threads(cfg.threads);
  const BuiltFShape source = load_built(source_path);
  const BuiltFShape target = load_built(target_path);
  MatchProblem problem = make_problem(cfg, source, target);
  DescentTrace trace = minimize(problem, cfg.descent);

  std::filesystem::create_directories(out_dir);
  FShapeFile result = to_file(*source.mesh, source.element, trace.final_signal);
  save_fshape(result, out_dir + "/optimum.off");
  write_trace_csv(out_dir + "/trace.csv", trace);
  std::cout << "energy " << format_g17(trace.final_energy) << " after "
            << trace.records.size() << " iterations (" << to_string(trace.reason) << ")\n";
  std::cout << "wrote " << out_dir << "/optimum.off and " << out_dir << "/trace.csv\n";
  return 0;
}

int cmd_energy(const std::string& fshape_path, const std::string& target_path,
               const std::string& config_path) {
  const RunConfig cfg = RunConfig::load(config_path);
  if (cfg.threads > 0) set_num_threads(cfg.threads);
  const BuiltFShape source = load_built(fshape_path);
  const BuiltFShape target = load_built(target_path);
  MatchProblem problem = make_problem(cfg, source, target);
  const EnergyBreakdown e = energy(problem, source.signal);
  std::cout << "E_volume " << format_g17(e.volume) << "\n";
  std::cout << "E_gradient " << format_g17(e.gradient) << "\n";
  std::cout << "E_var " << format_g17(e.varifold) << "\n";
  std::cout << "E_total " << format_g17(e.total()) << "\n";
  return 0;
}

int cmd_gamma(const std::string& config_path) {
  const RunConfig cfg = RunConfig::load(config_path);
  if (cfg.threads > 0) set_num_threads(cfg.threads);
  if (!cfg.source || !cfg.target)
    throw ConfigError("gamma requires 'source.surface' and 'target.surface' sections");
  if (cfg.gamma.hs.empty()) throw ConfigError("gamma requires 'gamma.levels' >= 1");

  GammaResult result =
      gamma_experiment(*cfg.source->surface, cfg.source->signal, *cfg.target->surface,
                       cfg.target->signal, cfg.model, cfg.gamma.hs, cfg.descent, cfg.gamma.options);

  std::filesystem::create_directories(cfg.output_dir);
  std::vector<std::vector<double>> rows;
  for (const GammaLevel& level : result.levels)
    rows.push_back({level.h, level.min_energy, level.l1_gap, level.oracle_gap});
  const std::string csv_path = cfg.output_dir + "/gamma.csv";
  save_csv(csv_path, {"h", "min_energy", "l1_gap", "oracle_gap"}, rows);

  std::cout << "h,min_energy,l1_gap,oracle_gap\n";
  for (const GammaLevel& level : result.levels) {
    std::cout << format_g17(level.h) << ',' << format_g17(level.min_energy) << ',';
    if (!std::isnan(level.l1_gap)) std::cout << format_g17(level.l1_gap);
    std::cout << ',';
    if (!std::isnan(level.oracle_gap)) std::cout << format_g17(level.oracle_gap);
    std::cout << '\n';
  }
  std::cout << "wrote " << csv_path << "\n";
  return 0;
}

int cmd_meshcheck(const std::string& mesh_path, const std::string& surface_name, double h,
                  const std::vector<std::string>& params, const std::string& json_path) {
  auto surface = builtin_surface(surface_name, parse_params(params));
  const BuiltFShape built = load_built(mesh_path);
  const AdmissibilityReport rep = admissibility_report(*built.mesh, *surface, h);
  const bool oriented = built.mesh->orientation_consistent();

  auto line = [](const std::string& name, double value, bool pass, const std::string& bound) {
    std::cout << "  " << name << " " << format_g17(value) << "  (" << bound << ": "
              << (pass ? "pass" : "FAIL") << ")\n";
  };
  std::cout << "admissibility report for " << mesh_path << " against " << surface_name
            << " at h=" << format_g17(h) << "\n";
  std::cout << "  triangles " << built.mesh->num_triangles() << ", vertices "
            << built.mesh->num_vertices() << "\n";
  line("diam", rep.diam, rep.pass_diam, "<= 2.5*h");
  line("max_dist", rep.max_dist, rep.pass_max_dist, "<= 1.0*h");
  line("alpha_max", rep.alpha_max, rep.pass_alpha, "<= 4.0*h");
  line("out_area", rep.out_area, rep.pass_out_area, "<= 1.0*h");
  std::cout << "  out_area/h " << format_g17(rep.out_area_ratio) << "\n";
  std::cout << "  hausdorff " << format_g17(rep.hausdorff_estimate) << "\n";
  std::cout << "  injectivity " << (rep.injectivity_ok ? "ok" : "FAIL") << "\n";
  std::cout << "  orientation_consistent " << (oriented ? "yes" : "no") << "\n";
  std::cout << "  overall " << (rep.pass_all ? "pass" : "FAIL") << "\n";

  nlohmann::json j{{"h", rep.h},
                   {"diam", rep.diam},
                   {"max_dist", rep.max_dist},
                   {"alpha_max", rep.alpha_max},
                   {"hausdorff_estimate", rep.hausdorff_estimate},
                   {"out_area", rep.out_area},
                   {"in_area", rep.in_area},
                   {"out_area_ratio", rep.out_area_ratio},
                   {"injectivity_ok", rep.injectivity_ok},
                   {"orientation_consistent", oriented},
                   {"pass", {{"max_dist", rep.pass_max_dist},
                             {"diam", rep.pass_diam},
                             {"alpha", rep.pass_alpha},
                             {"out_area", rep.pass_out_area},
                             {"all", rep.pass_all}}}};
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out) throw IoError("cannot open '" + json_path + "' for writing");
    out << j.dump(2) << "\n";
  } else {
    std::cout << j.dump(2) << "\n";
  }
  return rep.pass_all ? 0 : 2;
}

int cmd_discretize(const std::string& surface_name, const std::vector<std::string>& params,
                   const std::string& signal_text, double h, const std::string& element_name,
                   const std::string& out_path) {
  auto surface = builtin_surface(surface_name, parse_params(params));
  SignalExpr expr(signal_text);
  AnalyticSignal signal = [&](double u, double v) {
    const Vec3 p = surface->position(u, v);
    return expr.eval(u, v, p.x(), p.y(), p.z());
  };
  ElementKind element;
  if (element_name == "p0")
    element = ElementKind::P0;
  else if (element_name == "p1")
    element = ElementKind::P1;
  else
    throw ConfigError("--element must be p0 or p1, got '" + element_name + "'");

  TriangleMesh mesh = sample_triangulation(*surface, h);
  Eigen::VectorXd values = discretize_signal(*surface, signal, mesh, element);
  save_fshape(to_file(mesh, element, values), out_path);
  std::cout << "wrote " << out_path << " (" << mesh.num_triangles() << " triangles, "
            << (element == ElementKind::P0 ? "face" : "vertex") << " signal)\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"functional-shape matching on triangle meshes"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = default)");

  auto* match = app.add_subcommand("match", "minimize the matching energy for a source fshape");
  std::string source_path, target_path, config_path, out_dir = "out";
  match->add_option("--source", source_path, "source fshape file")->required();
  match->add_option("--target", target_path, "target fshape file")->required();
  match->add_option("--config", config_path, "run configuration")->required();
  match->add_option("--out", out_dir, "output directory");

  auto* energy_cmd = app.add_subcommand("energy", "print the energy breakdown of an fshape");
  std::string fshape_path;
  energy_cmd->add_option("--fshape", fshape_path, "source fshape file")->required();
  energy_cmd->add_option("--target", target_path, "target fshape file")->required();
  energy_cmd->add_option("--config", config_path, "run configuration")->required();

  auto* gamma = app.add_subcommand("gamma", "refinement experiment over a mesh family");
  gamma->add_option("--config", config_path, "run configuration")->required();

  auto* meshcheck = app.add_subcommand("meshcheck", "admissibility report for a mesh");
  std::string mesh_path, surface_name, json_path, element_name = "p1", signal_text = "0";
  double h = 0.1;
  std::vector<std::string> surface_params;
  meshcheck->add_option("--mesh", mesh_path, "mesh file (OFF or PLY)")->required();
  meshcheck->add_option("--surface", surface_name, "reference surface name")->required();
  meshcheck->add_option("--h", h, "refinement parameter")->required();
  meshcheck->add_option("--param", surface_params, "surface parameter key=value");
  meshcheck->add_option("--json", json_path, "write the JSON report here instead of stdout");

  auto* discretize = app.add_subcommand("discretize", "sample a surface signal onto a mesh");
  discretize->add_option("--surface", surface_name, "surface name")->required();
  discretize->add_option("--param", surface_params, "surface parameter key=value");
  discretize->add_option("--signal", signal_text, "signal expression over u,v,x,y,z")->required();
  discretize->add_option("--h", h, "target edge length")->required();
  discretize->add_option("--element", element_name, "p0 or p1")->required();
  std::string out_path;
  discretize->add_option("--out", out_path, "output fshape file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help() << "\n";
    return 1;
  }

  try {
    if (threads > 0) set_num_threads(threads);
    if (match->parsed()) return cmd_match(source_path, target_path, config_path, out_dir);
    if (energy_cmd->parsed()) return cmd_energy(fshape_path, target_path, config_path);
    if (gamma->parsed()) return cmd_gamma(config_path);
    if (meshcheck->parsed())
      return cmd_meshcheck(mesh_path, surface_name, h, surface_params, json_path);
    if (discretize->parsed())
      return cmd_discretize(surface_name, surface_params, signal_text, h, element_name, out_path);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace fvmatch
