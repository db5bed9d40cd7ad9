#pragma once

// Kinetic-mixture picture of the conditional (non-reacted) state:
//
//   rho_nr = w_0 rho_0 + w_T rho_T
//
// rho_0 is the initial state, of which the singlet fraction p_S recombines at
// rate k_S while the triplet fraction p_T is projected into rho_T. The
// survival fractions obey
//
//   df_0/dt = -k_S f_0,   df_T/dt = p_T k_S f_0
//   f_0 = exp(-k_S t),    f_T = p_T (1 - exp(-k_S t))
//
// and the properly normalized weights are w_X = f_X / (f_0 + f_T). The
// alternative w_0 = exp(-k_S t), w_T = 1 - exp(-k_S t) is kept as
// WeightScheme::Kominis so the two can be compared.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "rpkin/errors.hpp"
#include "rpkin/spinspace.hpp"

namespace rpkin {

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kWeightFloor = 1e-300;
inline constexpr double kWeightRateTolerance = 1e-12;

struct Weights {
  double omega_0 = 1.0;
  double omega_T = 0.0;
};

struct Fractions {
  double f_0 = 1.0;
  double f_T = 0.0;
};

struct FractionRates {
  double df_0 = 0.0;
  double df_T = 0.0;
};

enum class WeightScheme { Corrected, Kominis };

inline std::string_view to_string(WeightScheme s) { return s == WeightScheme::Corrected ? "corrected" : "kominis"; }

/// True for the scheme whose weights are inconsistent with the Jones-Hore flow.
inline bool is_disputed(WeightScheme s) { return s == WeightScheme::Kominis; }

inline WeightScheme parse_weight_scheme(std::string_view name) {
  if (name == "corrected") return WeightScheme::Corrected;
  if (name == "kominis") return WeightScheme::Kominis;
  throw InvalidArgument("unknown weight scheme '" + std::string(name) + "' (expected corrected or kominis)");
}

/// Frozen constants of the scheme (p_S, p_T, rho_0, rho_T) plus the current
/// survival fractions.
struct MixtureState {
  double p_S = 1.0;
  double p_T = 0.0;
  DensityMatrix rho_0;
  std::optional<DensityMatrix> rho_T;  // absent when p_T is below the floor
  double f_0 = 1.0;
  double f_T = 0.0;

  double product_fraction() const { return 1.0 - f_0 - f_T; }
  const SpinSpace& space() const { return rho_0.space(); }
};

inline MixtureState mixture_from_initial(const DensityMatrix& rho_init, double p_floor = kProbabilityFloor,
                                         const Tolerances& tol = kDefaultTolerances) {
  const double tr = rho_init.trace();
  if (std::abs(tr - 1.0) > tol.trace_tol)
    throw InvalidArgument("mixture_from_initial: initial state is not normalized (trace " + std::to_string(tr) + ")");
  const auto& space = rho_init.space();
  MixtureState mix{space.singlet_trace(rho_init.matrix()), space.triplet_trace(rho_init.matrix()), rho_init,
                   std::nullopt, 1.0, 0.0};
  if (mix.p_T > p_floor) mix.rho_T = DensityMatrix(space, space.project_triplet(rho_init.matrix()) / mix.p_T);
  return mix;
}

inline FractionRates fraction_rates(double f_0, double p_T, double k_S) {
  if (!(f_0 >= 0.0 && f_0 <= 1.0)) throw InvalidArgument("fraction_rates: f_0 outside [0, 1]");
  if (!(p_T >= 0.0 && p_T <= 1.0)) throw InvalidArgument("fraction_rates: p_T outside [0, 1]");
  if (!(k_S >= 0.0)) throw InvalidArgument("fraction_rates: k_S must be non-negative");
  return {-k_S * f_0, p_T * k_S * f_0};
}

inline Fractions kinetic_fractions(double t, double p_T, double k_S) {
  if (!(t >= 0.0)) throw InvalidArgument("kinetic_fractions: negative time");
  const double decay = std::exp(-k_S * t);
  return {decay, p_T * (1.0 - decay)};
}

inline Weights corrected_weights(double f_0, double f_T, double weight_floor = kWeightFloor) {
  const double total = f_0 + f_T;
  if (!(total > weight_floor)) throw AllReacted("corrected_weights: f_0 + f_T vanished");
  return {f_0 / total, f_T / total};
}

inline Weights kominis_weights(double t, double k_S) {
  if (!(t >= 0.0)) throw InvalidArgument("kominis_weights: negative time");
  const double decay = std::exp(-k_S * t);
  return {decay, 1.0 - decay};
}

/// Weights of `scheme` at time t for a mixture with triplet fraction p_T.
inline Weights weights_at(WeightScheme scheme, double t, double p_T, double k_S) {
  if (scheme == WeightScheme::Kominis) return kominis_weights(t, k_S);
  const auto f = kinetic_fractions(t, p_T, k_S);
  return corrected_weights(f.f_0, f.f_T);
}

/// The scheme's state after time t under the closed-form kinetics.
inline MixtureState advance(const MixtureState& mix, double t, double k_S) {
  MixtureState out = mix;
  const auto f = kinetic_fractions(t, mix.p_T, k_S);
  out.f_0 = f.f_0;
  out.f_T = f.f_T;
  return out;
}

namespace detail {
inline void require_unit_weights(const Weights& w, const char* who) {
  if (std::abs(w.omega_0 + w.omega_T - 1.0) > 1e-12)
    throw InvalidArgument(std::string(who) + ": weights do not sum to one");
}
}  // namespace detail

/// w_0 rho_0 + w_T rho_T
inline DensityMatrix reconstruct(const Weights& w, const MixtureState& mix) {
  detail::require_unit_weights(w, "reconstruct");
  if (w.omega_T == 0.0) return DensityMatrix(mix.space(), w.omega_0 * mix.rho_0.matrix());
  if (!mix.rho_T) throw InvalidArgument("reconstruct: nonzero triplet weight but the mixture has no triplet state");
  return DensityMatrix(mix.space(), w.omega_0 * mix.rho_0.matrix() + w.omega_T * mix.rho_T->matrix());
}

struct Decomposition {
  DensityMatrix rho_0;
  DensityMatrix rho_T;
};

/// Inverse of reconstruct: rho_T from the triplet block of rho_nr, rho_0 from
/// what is left.
inline Decomposition decompose(const DensityMatrix& rho_nr, const Weights& w, double p_floor = kProbabilityFloor) {
  if (!(w.omega_0 > 0.0)) throw InvalidArgument("decompose: omega_0 must be positive");
  const auto& space = rho_nr.space();
  const Matrix projected = space.project_triplet(rho_nr.matrix());
  const double triplet = projected.trace().real();
  if (!(triplet > p_floor)) throw NormalizationSingular("decompose: Tr(Q_T rho_nr Q_T) vanished");
  Matrix rho_T = projected / triplet;
  Matrix rho_0 = (rho_nr.matrix() - w.omega_T * rho_T) / w.omega_0;
  return {DensityMatrix(space, std::move(rho_0)), DensityMatrix(space, std::move(rho_T))};
}

/// d(omega_0)/dt. Evaluates both -k_S w_0 (w_T + p_T w_0) and
/// -k_S w_0 Tr(Q_T rho_nr Q_T); they must agree for any member of the mixture
/// family. Returns the trace form.
inline double weight_rate(const Weights& w, const DensityMatrix& rho_nr, double p_T, double k_S,
                          double tolerance = kWeightRateTolerance) {
  const double kinetic = -k_S * w.omega_0 * (w.omega_T + p_T * w.omega_0);
  const double traced = -k_S * w.omega_0 * rho_nr.space().triplet_trace(rho_nr.matrix());
  if (std::abs(kinetic - traced) > tolerance)
    throw MixtureInconsistent("weight_rate: kinetic form " + std::to_string(kinetic) + " and trace form " +
                              std::to_string(traced) + " disagree; rho_nr is not a kinetic mixture");
  return traced;
}

/// (dw_0/dt) rho_0 + (dw_T/dt) rho_T, evaluated at the reconstructed state.
inline Matrix mixture_rhs(const MixtureState& mix, const Weights& w, double k_S) {
  const auto rho_nr = reconstruct(w, mix);
  const double d0 = weight_rate(w, rho_nr, mix.p_T, k_S);
  const auto n = mix.space().rows();
  if (d0 == 0.0) return Matrix::Zero(n, n);
  if (!mix.rho_T) throw InvalidArgument("mixture_rhs: nonzero weight flow but the mixture has no triplet state");
  return d0 * mix.rho_0.matrix() - d0 * mix.rho_T->matrix();
}

}  // namespace rpkin
