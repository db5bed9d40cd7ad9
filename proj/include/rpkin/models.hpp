#pragma once

// Right-hand sides of the spin-selective recombination master equations.
//
//   jones-hore          d rho/dt = -k_S (rho - Q_T rho Q_T)            [- i[H, rho]]
//   haberkorn           d rho/dt = -(k_S/2)(Q_S rho + rho Q_S)          [- i[H, rho]]
//   normalized-jh       d rho/dt = -k_S (Tr(Q_T rho Q_T) rho - Q_T rho Q_T)
//   normalized-kominis  d rho/dt = -k_S (rho - Q_T rho Q_T / Tr(Q_T rho Q_T))
//
// The first two act on the unnormalized state (trace = survival probability),
// the last two on the state conditioned on survival (trace 1). normalized-jh
// is the multiplied-out form of the conditional Jones-Hore flow and stays
// regular at Tr(Q_T rho Q_T) = 0; normalized-kominis is kept literal and
// raises ModelSingular there.

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "rpkin/errors.hpp"
#include "rpkin/spinspace.hpp"

namespace rpkin {

enum class ModelKind { JonesHoreUnnormalized, Haberkorn, NormalizedJonesHore, NormalizedKominis };

inline constexpr std::array<ModelKind, 4> kAllModels{ModelKind::JonesHoreUnnormalized, ModelKind::Haberkorn,
                                                     ModelKind::NormalizedJonesHore,
                                                     ModelKind::NormalizedKominis};

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::JonesHoreUnnormalized: return "jones-hore";
    case ModelKind::Haberkorn: return "haberkorn";
    case ModelKind::NormalizedJonesHore: return "normalized-jh";
    case ModelKind::NormalizedKominis: return "normalized-kominis";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view name) {
  for (auto kind : kAllModels)
    if (to_string(kind) == name) return kind;
  throw InvalidArgument("unknown model '" + std::string(name) +
                        "' (expected jones-hore, haberkorn, normalized-jh or normalized-kominis)");
}

inline bool is_normalized(ModelKind kind) {
  return kind == ModelKind::NormalizedJonesHore || kind == ModelKind::NormalizedKominis;
}

struct RateParams {
  double k_S = 1.0;
  std::optional<Matrix> hamiltonian;  // angular-frequency units; unnormalized models only
};

inline constexpr double kDenomFloor = 1e-12;

/// Throws unless params are usable with `kind` on `space`.
inline void check_params(ModelKind kind, const SpinSpace& space, const RateParams& params,
                         const Tolerances& tol = kDefaultTolerances) {
  if (!(params.k_S >= 0.0)) throw InvalidArgument("k_S must be non-negative");
  if (!params.hamiltonian) return;
  if (is_normalized(kind))
    throw InvalidArgument(std::string(to_string(kind)) + " does not accept a Hamiltonian");
  space.require_shape(*params.hamiltonian, "hamiltonian");
  if (hermiticity_deviation(*params.hamiltonian) > tol.herm_tol)
    throw InvalidArgument("hamiltonian is not Hermitian");
}

namespace detail {

inline void add_commutator(Matrix& out, const RateParams& params, const Matrix& rho) {
  if (!params.hamiltonian) return;
  const Matrix& h = *params.hamiltonian;
  out -= Complex(0.0, 1.0) * (h * rho - rho * h);
}

inline void require_normalized(const Matrix& rho, const char* who, const Tolerances& tol) {
  const double tr = rho.trace().real();
  if (std::abs(tr - 1.0) > tol.trace_tol)
    throw InvalidArgument(std::string(who) + ": input is not normalized (trace " + std::to_string(tr) + ")");
}

inline Matrix jones_hore(const SpinSpace& space, const Matrix& rho, const RateParams& params) {
  space.require_shape(rho, "rhs_jones_hore");
  Matrix out = -params.k_S * (rho - space.project_triplet(rho));
  add_commutator(out, params, rho);
  return out;
}

inline Matrix haberkorn(const SpinSpace& space, const Matrix& rho, const RateParams& params) {
  space.require_shape(rho, "rhs_haberkorn");
  // Q_S rho + rho Q_S: singlet rows plus singlet columns (SS block counted twice).
  Matrix anti = Matrix::Zero(rho.rows(), rho.cols());
  for (Eigen::Index i = 0; i < rho.rows(); ++i)
    for (Eigen::Index j = 0; j < rho.cols(); ++j) {
      const double weight = (space.is_singlet(static_cast<std::size_t>(i)) ? 1.0 : 0.0) +
                            (space.is_singlet(static_cast<std::size_t>(j)) ? 1.0 : 0.0);
      anti(i, j) = weight * rho(i, j);
    }
  Matrix out = -0.5 * params.k_S * anti;
  add_commutator(out, params, rho);
  return out;
}

inline Matrix normalized_jones_hore(const SpinSpace& space, const Matrix& rho, const RateParams& params,
                                    const Tolerances& tol = kDefaultTolerances) {
  space.require_shape(rho, "rhs_normalized_jones_hore");
  require_normalized(rho, "rhs_normalized_jones_hore", tol);
  const Matrix projected = space.project_triplet(rho);
  const double triplet = projected.trace().real();
  return -params.k_S * (triplet * rho - projected);
}

inline Matrix normalized_kominis(const SpinSpace& space, const Matrix& rho, const RateParams& params,
                                 const Tolerances& tol = kDefaultTolerances) {
  space.require_shape(rho, "rhs_normalized_kominis");
  require_normalized(rho, "rhs_normalized_kominis", tol);
  const Matrix projected = space.project_triplet(rho);
  const double triplet = projected.trace().real();
  if (triplet < kDenomFloor)
    throw ModelSingular("rhs_normalized_kominis: Tr(Q_T rho Q_T) = " + std::to_string(triplet) +
                        " below floor; the equation is undefined at pure-singlet states");
  return -params.k_S * (rho - projected / triplet);
}

inline Matrix evaluate(ModelKind kind, const SpinSpace& space, const Matrix& rho, const RateParams& params,
                       const Tolerances& tol = kDefaultTolerances) {
  switch (kind) {
    case ModelKind::JonesHoreUnnormalized: return jones_hore(space, rho, params);
    case ModelKind::Haberkorn: return haberkorn(space, rho, params);
    case ModelKind::NormalizedJonesHore: return normalized_jones_hore(space, rho, params, tol);
    case ModelKind::NormalizedKominis: return normalized_kominis(space, rho, params, tol);
  }
  throw InvalidArgument("unknown model kind");
}

}  // namespace detail

inline Matrix rhs_jones_hore(const DensityMatrix& rho, const RateParams& params) {
  check_params(ModelKind::JonesHoreUnnormalized, rho.space(), params);
  return detail::jones_hore(rho.space(), rho.matrix(), params);
}

inline Matrix rhs_haberkorn(const DensityMatrix& rho, const RateParams& params) {
  check_params(ModelKind::Haberkorn, rho.space(), params);
  return detail::haberkorn(rho.space(), rho.matrix(), params);
}

inline Matrix rhs_normalized_jones_hore(const DensityMatrix& rho_nr, const RateParams& params) {
  check_params(ModelKind::NormalizedJonesHore, rho_nr.space(), params);
  return detail::normalized_jones_hore(rho_nr.space(), rho_nr.matrix(), params);
}

inline Matrix rhs_normalized_kominis(const DensityMatrix& rho_nr, const RateParams& params) {
  check_params(ModelKind::NormalizedKominis, rho_nr.space(), params);
  return detail::normalized_kominis(rho_nr.space(), rho_nr.matrix(), params);
}

inline Matrix rhs(ModelKind kind, const DensityMatrix& rho, const RateParams& params) {
  check_params(kind, rho.space(), params);
  return detail::evaluate(kind, rho.space(), rho.matrix(), params);
}

}  // namespace rpkin
