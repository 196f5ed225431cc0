#pragma once

#include "fvmatch/errors.hpp"
#include "fvmatch/varifold.hpp"

namespace fvmatch {

enum class ModelVariant { L2, H1, BV };

/// Penalty-plus-attachment energy:
///   L2: (alpha/2) L0^2[f]             + (gamma_w/2) Var[mu - nu]   (P0 signals)
///   H1: alpha L1^2[f] + beta H[f]     + (gamma_w/2) Var[mu - nu]   (P1 signals)
///   BV: alpha L1_eps[f] + beta TV_eps + (gamma_w/2) Var[mu - nu]   (P1 signals)
/// For L2, beta is unused and epsilon ignored; BV requires epsilon > 0.
struct EnergyModel {
  ModelVariant variant = ModelVariant::L2;
  double alpha = 1.0;
  double beta = 0.0;
  double gamma_w = 1.0;
  double epsilon = 1e-3;
  KernelParams kernel;

  void validate() const {
    if (alpha < 0.0 || beta < 0.0 || gamma_w < 0.0)
      throw BadParams("energy weights must be nonnegative");
    if (variant == ModelVariant::BV && !(epsilon > 0.0))
      throw NonsmoothEnergy("the BV model requires epsilon > 0");
  }
};

inline ElementKind element_for(ModelVariant v) {
  return v == ModelVariant::L2 ? ElementKind::P0 : ElementKind::P1;
}

}  // namespace fvmatch
