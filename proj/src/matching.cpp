#include "fvmatch/matching.hpp"

#include <algorithm>
#include <cmath>

#include "fvmatch/parallel.hpp"

namespace fvmatch {

namespace {

constexpr std::size_t kGeoCacheEntries = 30'000'000;  // ~240 MB of doubles

double smooth_abs(double x, double eps) { return std::sqrt(x * x + eps * eps); }

}  // namespace

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::GradientTolerance: return "grad_tol";
    case StopReason::MaxIterations: return "max_iters";
    case StopReason::StepUnderflow: return "step_underflow";
  }
  return "unknown";
}

MatchProblem::MatchProblem(const TriangleMesh& source, ElementKind element, DiscreteVarifold target,
                           EnergyModel model, Eigen::VectorXd initial_signal)
    : mesh_(&source), element_(element), target_(std::move(target)), model_(std::move(model)) {
  model_.validate();
  if (element_ != element_for(model_.variant))
    throw WrongModel("the L2 model uses P0 elements, the H1/BV models use P1 elements");
  const int n_dof = dof_count();
  if (initial_signal.size() == 0) initial_signal = Eigen::VectorXd::Zero(n_dof);
  if (initial_signal.size() != n_dof)
    throw MeshMismatch("initial signal has " + std::to_string(initial_signal.size()) +
                       " entries, expected " + std::to_string(n_dof));
  initial_ = std::move(initial_signal);

  source_atoms_ = from_fshape(SignalP0(source, Eigen::VectorXd::Zero(source.num_triangles())));
  for (const VarifoldAtom& a : target_.atoms)
    if (std::abs(a.normal.norm() - 1.0) > 1e-8)
      throw NonUnitNormal("target varifold contains a non-unit normal");
  nu_norm2_ = inner_product(target_, target_, model_.kernel);

  const std::size_t n = source_atoms_.atoms.size();
  const std::size_t m = target_.atoms.size();
  if (model_.gamma_w > 0.0 && n * (n + 1) / 2 + n * m <= kGeoCacheEntries) {
    self_geo_.resize(n * (n + 1) / 2);
    parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t i) {
      const auto ii = static_cast<std::size_t>(i);
      std::size_t base = ii * n - ii * (ii - 1) / 2;  // row offset in the upper triangle
      for (std::size_t j = ii; j < n; ++j)
        self_geo_[base + (j - ii)] =
            detail::pair_geometry(source_atoms_.atoms[ii], source_atoms_.atoms[j], model_.kernel);
    });
    cross_geo_.resize(n * m);
    parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t i) {
      const auto ii = static_cast<std::size_t>(i);
      for (std::size_t c = 0; c < m; ++c)
        cross_geo_[ii * m + c] =
            detail::pair_geometry(source_atoms_.atoms[ii], target_.atoms[c], model_.kernel);
    });
  }
}

int MatchProblem::dof_count() const {
  return element_ == ElementKind::P0 ? mesh_->num_triangles() : mesh_->num_vertices();
}

Eigen::VectorXd MatchProblem::barycenter_signals(const Eigen::VectorXd& f) const {
  if (element_ == ElementKind::P0) return f;
  Eigen::VectorXd f0(mesh_->num_triangles());
  for (int k = 0; k < mesh_->num_triangles(); ++k) {
    const auto& t = mesh_->triangle(k);
    f0[k] = (f[t[0]] + f[t[1]] + f[t[2]]) / 3.0;
  }
  return f0;
}

double MatchProblem::varifold_term(const Eigen::VectorXd& f) const {
  const Eigen::VectorXd f0 = barycenter_signals(f);
  const auto n = static_cast<std::size_t>(mesh_->num_triangles());
  const auto m = target_.atoms.size();
  const KernelParams& kp = model_.kernel;

  double self, cross;
  if (!self_geo_.empty()) {
    // <mu,mu> from the cached upper triangle: diagonal once, off-diagonal twice
    self = parallel_sum(static_cast<std::int64_t>(n), [&](std::int64_t i) {
      const auto ii = static_cast<std::size_t>(i);
      const std::size_t base = ii * n - ii * (ii - 1) / 2;
      double row = self_geo_[base];  // j == i, kf = 1
      for (std::size_t j = ii + 1; j < n; ++j)
        row += 2.0 * self_geo_[base + (j - ii)] * detail::kf(f0[static_cast<Eigen::Index>(ii)],
                                                             f0[static_cast<Eigen::Index>(j)], kp);
      return row;
    });
    cross = parallel_sum(static_cast<std::int64_t>(n), [&](std::int64_t i) {
      const auto ii = static_cast<std::size_t>(i);
      double row = 0.0;
      for (std::size_t c = 0; c < m; ++c)
        row += cross_geo_[ii * m + c] *
               detail::kf(f0[static_cast<Eigen::Index>(ii)], target_.atoms[c].signal, kp);
      return row;
    });
  } else {
    self = parallel_sum(static_cast<std::int64_t>(n), [&](std::int64_t i) {
      const auto ii = static_cast<std::size_t>(i);
      const VarifoldAtom& a = source_atoms_.atoms[ii];
      double row = detail::pair_geometry(a, a, kp);
      for (std::size_t j = ii + 1; j < n; ++j)
        row += 2.0 * detail::pair_geometry(a, source_atoms_.atoms[j], kp) *
               detail::kf(f0[static_cast<Eigen::Index>(ii)], f0[static_cast<Eigen::Index>(j)], kp);
      return row;
    });
    cross = parallel_sum(static_cast<std::int64_t>(n), [&](std::int64_t i) {
      const auto ii = static_cast<std::size_t>(i);
      const VarifoldAtom& a = source_atoms_.atoms[ii];
      double row = 0.0;
      for (std::size_t c = 0; c < m; ++c)
        row += detail::pair_geometry(a, target_.atoms[c], kp) *
               detail::kf(f0[static_cast<Eigen::Index>(ii)], target_.atoms[c].signal, kp);
      return row;
    });
  }
  double d = self - 2.0 * cross + nu_norm2_;
  if (d < 0.0 && d > -1e-10 * (self + nu_norm2_)) d = 0.0;
  return d;
}

Eigen::VectorXd MatchProblem::varifold_gradient(const Eigen::VectorXd& f) const {
  const Eigen::VectorXd f0 = barycenter_signals(f);
  const auto n = static_cast<std::size_t>(mesh_->num_triangles());
  const auto m = target_.atoms.size();
  const KernelParams& kp = model_.kernel;

  Eigen::VectorXd per_triangle(static_cast<Eigen::Index>(n));
  parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t k) {
    const auto kk = static_cast<std::size_t>(k);
    const double fk = f0[static_cast<Eigen::Index>(kk)];
    double self = 0.0, cross = 0.0;
    if (!self_geo_.empty()) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t lo = std::min(kk, j), hi = std::max(kk, j);
        const double geo = self_geo_[lo * n - lo * (lo - 1) / 2 + (hi - lo)];
        self += geo * detail::dkf(fk, f0[static_cast<Eigen::Index>(j)], kp);
      }
      for (std::size_t c = 0; c < m; ++c)
        cross += cross_geo_[kk * m + c] * detail::dkf(fk, target_.atoms[c].signal, kp);
    } else {
      const VarifoldAtom& a = source_atoms_.atoms[kk];
      for (std::size_t j = 0; j < n; ++j)
        self += detail::pair_geometry(a, source_atoms_.atoms[j], kp) *
                detail::dkf(fk, f0[static_cast<Eigen::Index>(j)], kp);
      for (std::size_t c = 0; c < m; ++c)
        cross += detail::pair_geometry(a, target_.atoms[c], kp) *
                 detail::dkf(fk, target_.atoms[c].signal, kp);
    }
    per_triangle[static_cast<Eigen::Index>(kk)] = 2.0 * self - 2.0 * cross;
  });

  if (element_ == ElementKind::P0) return per_triangle;
  Eigen::VectorXd per_vertex = Eigen::VectorXd::Zero(mesh_->num_vertices());
  for (int k = 0; k < mesh_->num_triangles(); ++k) {
    const auto& t = mesh_->triangle(k);
    for (int i = 0; i < 3; ++i) per_vertex[t[static_cast<std::size_t>(i)]] += per_triangle[k] / 3.0;
  }
  return per_vertex;
}

EnergyBreakdown energy(const MatchProblem& problem, const Eigen::VectorXd& f) {
  if (f.size() != problem.dof_count())
    throw MeshMismatch("signal has " + std::to_string(f.size()) + " dofs, expected " +
                       std::to_string(problem.dof_count()));
  const EnergyModel& model = problem.model();
  const TriangleMesh& mesh = problem.mesh();
  EnergyBreakdown out;
  switch (model.variant) {
    case ModelVariant::L2:
      out.volume = 0.5 * model.alpha * lp_norm_p0(SignalP0(mesh, f), 2.0);
      break;
    case ModelVariant::H1: {
      SignalP1 s(mesh, f);
      out.volume = model.alpha * newton_cotes_lp(s, 2);
      out.gradient = model.beta * h1_seminorm(s);
      break;
    }
    case ModelVariant::BV: {
      SignalP1 s(mesh, f);
      out.volume = model.alpha * l1_smoothed(s, model.epsilon);
      out.gradient = model.beta * total_variation(s, model.epsilon);
      break;
    }
  }
  if (model.gamma_w > 0.0) out.varifold = 0.5 * model.gamma_w * problem.varifold_term(f);
  return out;
}

Eigen::VectorXd energy_gradient(const MatchProblem& problem, const Eigen::VectorXd& f) {
  if (f.size() != problem.dof_count())
    throw MeshMismatch("signal has " + std::to_string(f.size()) + " dofs, expected " +
                       std::to_string(problem.dof_count()));
  const EnergyModel& model = problem.model();
  const TriangleMesh& mesh = problem.mesh();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(f.size());

  switch (model.variant) {
    case ModelVariant::L2:
      for (int k = 0; k < mesh.num_triangles(); ++k)
        g[k] = model.alpha * mesh.raw_geometry(k).area * f[k];
      break;
    case ModelVariant::H1: {
      for (int k = 0; k < mesh.num_triangles(); ++k) {
        const auto& t = mesh.triangle(k);
        const double area = mesh.raw_geometry(k).area;
        const double fm[3] = {0.5 * (f[t[0]] + f[t[1]]), 0.5 * (f[t[0]] + f[t[2]]),
                              0.5 * (f[t[1]] + f[t[2]])};
        // d/df_i of (area/3) sum of midpoint squares
        g[t[0]] += model.alpha * area / 3.0 * (fm[0] + fm[1]);
        g[t[1]] += model.alpha * area / 3.0 * (fm[0] + fm[2]);
        g[t[2]] += model.alpha * area / 3.0 * (fm[1] + fm[2]);
      }
      SignalP1 s(mesh, f);
      DiscreteGradient grad = gradient(s);
      for (int k = 0; k < mesh.num_triangles(); ++k) {
        const auto& t = mesh.triangle(k);
        const TriangleGeometry& geo = mesh.raw_geometry(k);
        const double area = geo.area;
        const Vec3 n = geo.edges[1].cross(geo.edges[2]);
        const Vec3 scaled = n / n.squaredNorm();
        const Vec3& gk = grad.per_triangle[static_cast<std::size_t>(k)];
        for (int i = 0; i < 3; ++i) {
          const Vec3 basis_grad = scaled.cross(geo.edges[static_cast<std::size_t>(i)]);
          g[t[static_cast<std::size_t>(i)]] += model.beta * area * 2.0 * gk.dot(basis_grad);
        }
      }
      break;
    }
    case ModelVariant::BV: {
      if (!(model.epsilon > 0.0))
        throw NonsmoothEnergy("the BV energy gradient requires epsilon > 0");
      const double eps = model.epsilon;
      for (int k = 0; k < mesh.num_triangles(); ++k) {
        const auto& t = mesh.triangle(k);
        const double area = mesh.raw_geometry(k).area;
        const double fm[3] = {0.5 * (f[t[0]] + f[t[1]]), 0.5 * (f[t[0]] + f[t[2]]),
                              0.5 * (f[t[1]] + f[t[2]])};
        auto dsmooth = [eps](double x) { return x / std::sqrt(x * x + eps * eps); };
        g[t[0]] += model.alpha * area / 3.0 * 0.5 * (dsmooth(fm[0]) + dsmooth(fm[1]));
        g[t[1]] += model.alpha * area / 3.0 * 0.5 * (dsmooth(fm[0]) + dsmooth(fm[2]));
        g[t[2]] += model.alpha * area / 3.0 * 0.5 * (dsmooth(fm[1]) + dsmooth(fm[2]));
      }
      SignalP1 s(mesh, f);
      DiscreteGradient grad = gradient(s);
      for (int k = 0; k < mesh.num_triangles(); ++k) {
        const auto& t = mesh.triangle(k);
        const TriangleGeometry& geo = mesh.raw_geometry(k);
        const Vec3 n = geo.edges[1].cross(geo.edges[2]);
        const Vec3 scaled = n / n.squaredNorm();
        const Vec3& gk = grad.per_triangle[static_cast<std::size_t>(k)];
        const double denom = smooth_abs(gk.norm(), eps);
        for (int i = 0; i < 3; ++i) {
          const Vec3 basis_grad = scaled.cross(geo.edges[static_cast<std::size_t>(i)]);
          g[t[static_cast<std::size_t>(i)]] += model.beta * geo.area * gk.dot(basis_grad) / denom;
        }
      }
      break;
    }
  }
  if (model.gamma_w > 0.0) g += 0.5 * model.gamma_w * problem.varifold_gradient(f);
  return g;
}

DescentTrace minimize(const MatchProblem& problem, const DescentConfig& config) {
  if (!(config.shrink > 0.0 && config.shrink < 1.0) || !(config.grow >= 1.0) ||
      !(config.initial_step > 0.0) || config.max_iters < 0)
    throw BadParams("invalid descent configuration");
  DescentTrace trace;
  Eigen::VectorXd f = problem.initial_signal();
  EnergyBreakdown terms = energy(problem, f);
  double e = terms.total();
  Eigen::VectorXd g = energy_gradient(problem, f);
  double step = config.initial_step;
  const double step_floor = 1e-16 * config.initial_step;
  trace.reason = StopReason::MaxIterations;

  for (int it = 0; it < config.max_iters; ++it) {
    const double grad_inf = g.size() > 0 ? g.cwiseAbs().maxCoeff() : 0.0;
    if (grad_inf <= config.grad_tol) {
      trace.reason = StopReason::GradientTolerance;
      break;
    }
    const Eigen::VectorXd candidate = f - step * g;
    const EnergyBreakdown cand_terms = energy(problem, candidate);
    const double cand_e = cand_terms.total();
    const bool accept = cand_e <= e - config.armijo * step * g.squaredNorm();
    trace.records.push_back({it, accept ? cand_e : e, accept ? cand_terms : terms, grad_inf, step,
                             accept});
    if (accept) {
      f = candidate;
      e = cand_e;
      terms = cand_terms;
      g = energy_gradient(problem, f);
      step *= config.grow;
    } else {
      step *= config.shrink;
      if (step < step_floor) {
        trace.reason = StopReason::StepUnderflow;
        break;
      }
    }
  }
  trace.final_signal = std::move(f);
  trace.final_terms = terms;
  trace.final_energy = e;
  return trace;
}

BoundCheckReport minimum_bound_check(const DescentTrace& trace, const MatchProblem& problem) {
  if (problem.model().variant != ModelVariant::L2)
    throw WrongModel("minimum_bound_check applies to the L2 model");
  BoundCheckReport rep;
  rep.sup_signal = trace.final_signal.size() > 0 ? trace.final_signal.cwiseAbs().maxCoeff() : 0.0;
  const double gamma_w = problem.model().gamma_w;
  if (gamma_w <= 0.0) {
    rep.ratio = 0.0;
    return rep;
  }
  double target_mass = 0.0;
  for (const VarifoldAtom& a : problem.target().atoms) target_mass += a.weight;
  const double denom = gamma_w * (total_area(problem.mesh()) + target_mass);
  rep.ratio = rep.sup_signal * problem.model().alpha / denom;
  rep.finite = std::isfinite(rep.ratio);
  return rep;
}

OscillationReport oscillation_report(const TriangleMesh& mesh, ElementKind element,
                                     const Eigen::VectorXd& f, const std::vector<char>& mask) {
  if (static_cast<int>(mask.size()) != mesh.num_triangles())
    throw LengthMismatch("mask has " + std::to_string(mask.size()) + " entries for " +
                         std::to_string(mesh.num_triangles()) + " triangles");
  Eigen::VectorXd vertex_values;
  if (element == ElementKind::P1) {
    if (f.size() != mesh.num_vertices()) throw LengthMismatch("P1 signal length mismatch");
    vertex_values = f;
  } else {
    if (f.size() != mesh.num_triangles()) throw LengthMismatch("P0 signal length mismatch");
    // area-weighted interpolation to vertices
    vertex_values = Eigen::VectorXd::Zero(mesh.num_vertices());
    Eigen::VectorXd weight = Eigen::VectorXd::Zero(mesh.num_vertices());
    for (int k = 0; k < mesh.num_triangles(); ++k) {
      const auto& t = mesh.triangle(k);
      const double a = mesh.raw_geometry(k).area;
      for (int i = 0; i < 3; ++i) {
        vertex_values[t[static_cast<std::size_t>(i)]] += a * f[k];
        weight[t[static_cast<std::size_t>(i)]] += a;
      }
    }
    for (int i = 0; i < mesh.num_vertices(); ++i)
      if (weight[i] > 0.0) vertex_values[i] /= weight[i];
  }

  OscillationReport rep;
  SignalP1 s(mesh, vertex_values);
  DiscreteGradient grad = gradient(s);
  for (int k = 0; k < mesh.num_triangles(); ++k) {
    if (!mask[static_cast<std::size_t>(k)]) continue;
    rep.masked_tv += mesh.raw_geometry(k).area * grad.per_triangle[static_cast<std::size_t>(k)].norm();
    if (element == ElementKind::P0) {
      rep.masked_sup = std::max(rep.masked_sup, std::abs(f[k]));
    } else {
      const auto& t = mesh.triangle(k);
      for (int i = 0; i < 3; ++i)
        rep.masked_sup = std::max(rep.masked_sup, std::abs(f[t[static_cast<std::size_t>(i)]]));
    }
  }
  return rep;
}

GammaResult gamma_experiment(const AnalyticSurface& source_surface, const AnalyticSignal& f0,
                             const AnalyticSurface& target_surface, const AnalyticSignal& g,
                             const EnergyModel& model, const std::vector<double>& hs,
                             const DescentConfig& descent, const GammaOptions& opts) {
  model.validate();
  if (hs.empty()) throw BadParams("gamma_experiment requires at least one refinement level");
  for (std::size_t i = 1; i < hs.size(); ++i)
    if (!(hs[i] < hs[i - 1])) throw BadParams("refinement steps must strictly decrease");

  const ElementKind element = element_for(model.variant);
  GammaResult result;
  SurfaceQuadrature lift_quad = balanced_surface_quadrature(source_surface, opts.lift_order);
  std::vector<LiftedSignal> lifts;

  for (double h : hs) {
    auto source_mesh = std::make_shared<TriangleMesh>(sample_triangulation(source_surface, h));
    auto target_mesh = std::make_shared<TriangleMesh>(sample_triangulation(target_surface, h));
    if (opts.validate_admissibility) {
      if (!admissibility_report(*source_mesh, source_surface, h, opts.admissibility).pass_all)
        throw ValidationError("source triangulation fails admissibility at h=" + std::to_string(h));
      if (!admissibility_report(*target_mesh, target_surface, h, opts.admissibility).pass_all)
        throw ValidationError("target triangulation fails admissibility at h=" + std::to_string(h));
    }

    DiscreteVarifold nu;
    if (element == ElementKind::P0)
      nu = from_fshape(discretize_signal_p0(target_surface, g, *target_mesh));
    else
      nu = from_fshape(discretize_signal_p1(target_surface, g, *target_mesh));

    Eigen::VectorXd init = discretize_signal(source_surface, f0, *source_mesh, element);
    MatchProblem problem(*source_mesh, element, std::move(nu), model, std::move(init));
    DescentTrace trace = minimize(problem, descent);

    GammaLevel level;
    level.h = h;
    level.min_energy = trace.final_energy;
    level.iterations = static_cast<int>(trace.records.size());
    level.reason = trace.reason;

    LiftedSignal lifted;
    if (element == ElementKind::P0)
      lifted = lift_signal(SignalP0(*source_mesh, trace.final_signal), source_surface, lift_quad);
    else
      lifted = lift_signal(SignalP1(*source_mesh, trace.final_signal), source_surface, lift_quad);
    if (!lifts.empty()) level.l1_gap = lifted_l1_distance(lifts.back(), lifted, lift_quad);

    if (opts.with_oracle) {
      // Continuous energy of the lifted minimizer is approximated by the
      // penalty on the mesh (which converges to the surface penalty) plus the
      // continuous varifold distance of the lifted signal.
      // The lifted signal is piecewise smooth only; reuse the lift nodes.
      double pen;
      switch (model.variant) {
        case ModelVariant::L2: {
          double l2 = 0.0;
          for (std::size_t i = 0; i < lift_quad.size(); ++i)
            if (lifted.hit[i]) l2 += lift_quad.w[i] * lifted.values[i] * lifted.values[i];
          pen = 0.5 * model.alpha * l2;
          break;
        }
        case ModelVariant::H1: {
          SignalP1 s(*source_mesh, trace.final_signal);
          pen = model.alpha * newton_cotes_lp(s, 2) + model.beta * h1_seminorm(s);
          break;
        }
        case ModelVariant::BV: {
          SignalP1 s(*source_mesh, trace.final_signal);
          pen = model.alpha * l1_smoothed(s, model.epsilon) +
                model.beta * total_variation(s, model.epsilon);
          break;
        }
      }
      double var = 0.0;
      if (model.gamma_w > 0.0) {
        // <mu_X(lift), mu_X(lift)> and <mu_X(lift), nu> on the lift nodes
        const std::size_t nq = lift_quad.size();
        std::vector<Vec3> pts(nq), nrm(nq);
        for (std::size_t i = 0; i < nq; ++i) {
          pts[i] = source_surface.position(lift_quad.u[i], lift_quad.v[i]);
          nrm[i] = source_surface.normal(lift_quad.u[i], lift_quad.v[i]);
        }
        const KernelParams& kp = model.kernel;
        double mu2 = parallel_sum(static_cast<std::int64_t>(nq), [&](std::int64_t a) {
          const auto ia = static_cast<std::size_t>(a);
          if (!lifted.hit[ia]) return 0.0;
          double row = 0.0;
          for (std::size_t b = 0; b < nq; ++b) {
            if (!lifted.hit[b]) continue;
            VarifoldAtom atom_a{lift_quad.w[ia], pts[ia], nrm[ia], lifted.values[ia]};
            VarifoldAtom atom_b{lift_quad.w[b], pts[b], nrm[b], lifted.values[b]};
            row += detail::pair_geometry(atom_a, atom_b, kp) *
                   detail::kf(atom_a.signal, atom_b.signal, kp);
          }
          return row;
        });
        double cross = parallel_sum(static_cast<std::int64_t>(nq), [&](std::int64_t a) {
          const auto ia = static_cast<std::size_t>(a);
          if (!lifted.hit[ia]) return 0.0;
          const VarifoldAtom atom_a{lift_quad.w[ia], pts[ia], nrm[ia], lifted.values[ia]};
          double row = 0.0;
          for (const VarifoldAtom& b : problem.target().atoms)
            row += detail::pair_geometry(atom_a, b, kp) * detail::kf(atom_a.signal, b.signal, kp);
          return row;
        });
        var = 0.5 * model.gamma_w * (mu2 - 2.0 * cross + problem.target_norm2());
      }
      level.oracle_gap = std::abs(trace.final_energy - (pen + var));
    }

    lifts.push_back(std::move(lifted));
    result.minimizers.push_back(trace.final_signal);
    result.levels.push_back(level);
  }
  return result;
}

}  // namespace fvmatch
