#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fvmatch/energy_model.hpp"
#include "fvmatch/fem.hpp"
#include "fvmatch/surface.hpp"
#include "fvmatch/varifold.hpp"

namespace fvmatch {

struct EnergyBreakdown {
  double volume = 0.0;    // L2/L1 penalty term (weighted)
  double gradient = 0.0;  // H1/TV penalty term (weighted)
  double varifold = 0.0;  // (gamma_w/2) Var[mu - nu]
  double total() const { return volume + gradient + varifold; }
};

struct DescentConfig {
  int max_iters = 2000;
  double grad_tol = 1e-8;
  double initial_step = 1.0;
  double shrink = 0.5;
  double grow = 1.3;
  double armijo = 1e-4;
};

struct DescentRecord {
  int iteration = 0;
  double energy = 0.0;
  EnergyBreakdown terms;
  double grad_inf = 0.0;
  double step = 0.0;
  bool accepted = false;
};

enum class StopReason { GradientTolerance, MaxIterations, StepUnderflow };

std::string to_string(StopReason r);

struct DescentTrace {
  std::vector<DescentRecord> records;
  Eigen::VectorXd final_signal;
  EnergyBreakdown final_terms;
  double final_energy = 0.0;
  StopReason reason = StopReason::MaxIterations;
};

/// Fixed-geometry matching problem: source mesh + element kind, a precomputed
/// target varifold, the energy model, and the initial signal. The target norm
/// and the pairwise geometry kernels (which never change during descent) are
/// cached at construction when they fit in memory.
class MatchProblem {
 public:
  MatchProblem(const TriangleMesh& source, ElementKind element, DiscreteVarifold target,
               EnergyModel model, Eigen::VectorXd initial_signal = {});

  const TriangleMesh& mesh() const { return *mesh_; }
  ElementKind element() const { return element_; }
  const DiscreteVarifold& target() const { return target_; }
  const EnergyModel& model() const { return model_; }
  const Eigen::VectorXd& initial_signal() const { return initial_; }
  int dof_count() const;
  double target_norm2() const { return nu_norm2_; }

  /// Var[mu(f) - nu] for the source signal dofs f.
  double varifold_term(const Eigen::VectorXd& f) const;
  /// d/df of varifold_term.
  Eigen::VectorXd varifold_gradient(const Eigen::VectorXd& f) const;

 private:
  Eigen::VectorXd barycenter_signals(const Eigen::VectorXd& f) const;

  const TriangleMesh* mesh_;
  ElementKind element_;
  DiscreteVarifold target_;
  EnergyModel model_;
  Eigen::VectorXd initial_;
  DiscreteVarifold source_atoms_;  // signals overwritten per evaluation
  double nu_norm2_ = 0.0;
  // cached geometry kernel factors (pair_geometry), empty when too large
  std::vector<double> self_geo_;   // row-major upper triangle including diagonal
  std::vector<double> cross_geo_;  // source x target
};

EnergyBreakdown energy(const MatchProblem& problem, const Eigen::VectorXd& f);
Eigen::VectorXd energy_gradient(const MatchProblem& problem, const Eigen::VectorXd& f);

/// Backtracking adaptive gradient descent: accept f - s*g when the Armijo
/// decrease holds, then s *= grow; otherwise s *= shrink. Stops on
/// ||g||_inf <= grad_tol, max_iters trials, or step underflow.
DescentTrace minimize(const MatchProblem& problem, const DescentConfig& config = {});

/// Scale-free restatement of the minimizer sup bound for the L2 model:
/// ratio = ||f*||_inf * alpha / (gamma_w * (area(source) + mass(target))).
struct BoundCheckReport {
  double sup_signal = 0.0;
  double ratio = 0.0;
  bool finite = true;
};

BoundCheckReport minimum_bound_check(const DescentTrace& trace, const MatchProblem& problem);

/// Discrete TV and sup norm of the signal restricted to masked triangles.
/// P0 signals are interpolated to vertices (area-weighted) for the TV part.
struct OscillationReport {
  double masked_tv = 0.0;
  double masked_sup = 0.0;
};

OscillationReport oscillation_report(const TriangleMesh& mesh, ElementKind element,
                                     const Eigen::VectorXd& f, const std::vector<char>& mask);

struct GammaOptions {
  int lift_order = 20;        // quadrature order for lifting minimizers
  bool with_oracle = true;    // evaluate the continuous energy of each lifted minimizer
  OracleOptions oracle;
  bool validate_admissibility = false;
  AdmissibilityOptions admissibility;
};

struct GammaLevel {
  double h = 0.0;
  double min_energy = 0.0;
  double l1_gap = std::numeric_limits<double>::quiet_NaN();      // vs previous level
  double oracle_gap = std::numeric_limits<double>::quiet_NaN();  // |E_h - E_cont(lift)|
  int iterations = 0;
  StopReason reason = StopReason::MaxIterations;
};

struct GammaResult {
  std::vector<GammaLevel> levels;
  std::vector<Eigen::VectorXd> minimizers;
};

/// Refinement experiment: per level, triangulate source and target, discretize
/// the signals, minimize, lift the minimizer, and report energy/lift gaps
/// between consecutive levels.
GammaResult gamma_experiment(const AnalyticSurface& source_surface, const AnalyticSignal& f0,
                             const AnalyticSurface& target_surface, const AnalyticSignal& g,
                             const EnergyModel& model, const std::vector<double>& hs,
                             const DescentConfig& descent = {}, const GammaOptions& opts = {});

}  // namespace fvmatch
