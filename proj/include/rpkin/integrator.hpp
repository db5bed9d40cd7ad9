#pragma once

// Time evolution of the master equations on a snapshot grid, plus the exact
// propagators of the Hamiltonian-free unnormalized models used as oracles.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rpkin/errors.hpp"
#include "rpkin/models.hpp"
#include "rpkin/spinspace.hpp"

namespace rpkin {

enum class Method { Rk4Fixed, Rk45Adaptive };

inline std::string_view to_string(Method m) { return m == Method::Rk4Fixed ? "rk4-fixed" : "rk45-adaptive"; }

inline Method parse_method(std::string_view name) {
  if (name == "rk4-fixed") return Method::Rk4Fixed;
  if (name == "rk45-adaptive") return Method::Rk45Adaptive;
  throw InvalidArgument("unknown integration method '" + std::string(name) +
                        "' (expected rk4-fixed or rk45-adaptive)");
}

struct IntegratorOptions {
  Method method = Method::Rk45Adaptive;
  std::optional<double> dt;  // rk4 step and rk45 initial step; default 1e-3 / k_S
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double min_step = 1e-12;
  double safety = 0.9;
  Tolerances tolerances{};

  double step_for(double k_S) const {
    if (dt) return *dt;
    return k_S > 0.0 ? 1e-3 / k_S : 1e-3;
  }
};

struct Observables {
  double trace = 0.0;
  double p_singlet = 0.0;
  double p_triplet = 0.0;
  double min_eigenvalue = 0.0;
  double hermiticity = 0.0;
};

struct Trajectory {
  ModelKind model = ModelKind::JonesHoreUnnormalized;
  std::vector<double> times;
  std::vector<DensityMatrix> states;
  std::vector<Observables> observables;

  std::size_t size() const { return times.size(); }
};

inline Observables observe(const DensityMatrix& rho) {
  const auto& m = rho.matrix();
  return {m.trace().real(), singlet_probability(rho), triplet_probability(rho), min_eigenvalue(m),
          hermiticity_deviation(m)};
}

/// n points evenly spaced on [0, t_end], endpoints exact.
inline std::vector<double> uniform_grid(double t_end, std::size_t n) {
  if (!(t_end > 0.0)) throw InvalidArgument("uniform_grid: t_end must be positive");
  if (n < 2) throw InvalidArgument("uniform_grid: need at least two points");
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i)
    grid[i] = t_end * static_cast<double>(i) / static_cast<double>(n - 1);
  grid.back() = t_end;
  return grid;
}

// Generic explicit steppers. State needs +, -, scalar * and a cwise max-abs.

/// Classical fourth-order Runge-Kutta step.
template <class State, class Rhs>
State rk4_step(const State& y, double t, double h, Rhs&& f) {
  const State k1 = f(t, y);
  const State k2 = f(t + 0.5 * h, State(y + (0.5 * h) * k1));
  const State k3 = f(t + 0.5 * h, State(y + (0.5 * h) * k2));
  const State k4 = f(t + h, State(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <class State>
struct EmbeddedStep {
  State y;      // fifth-order solution (propagated)
  State error;  // difference to the embedded fourth-order solution
};

/// Dormand-Prince 5(4) step with local extrapolation.
template <class State, class Rhs>
EmbeddedStep<State> dopri5_step(const State& y, double t, double h, Rhs&& f) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;

  const State k1 = f(t, y);
  const State k2 = f(t + c2 * h, State(y + h * (a21 * k1)));
  const State k3 = f(t + c3 * h, State(y + h * (a31 * k1 + a32 * k2)));
  const State k4 = f(t + c4 * h, State(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
  const State k5 = f(t + c5 * h, State(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
  const State k6 = f(t + h, State(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
  State y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  const State k7 = f(t + h, y5);
  State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  return {std::move(y5), std::move(err)};
}

namespace detail {

inline void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw InvalidArgument("integrate: empty time grid");
  if (grid.front() != 0.0) throw InvalidArgument("integrate: time grid must start at 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw InvalidArgument("integrate: time grid must be strictly increasing");
}

inline std::string at_time(ModelKind model, double t) {
  return std::string(to_string(model)) + " at t=" + std::to_string(t);
}

/// Scaled max-norm of the embedded error estimate.
inline double error_norm(const Matrix& err, const Matrix& y0, const Matrix& y1, double rel_tol, double abs_tol) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double scale = abs_tol + rel_tol * std::max(std::abs(y0(i)), std::abs(y1(i)));
    worst = std::max(worst, std::abs(err(i)) / scale);
  }
  return worst;
}

}  // namespace detail

/// Evolves rho_init under `model` and records a snapshot at every grid time.
/// The state is re-symmetrized after every step. Positivity is monitored:
/// a snapshot with min eigenvalue below -psd_fail aborts the run.
inline Trajectory integrate(ModelKind model, const DensityMatrix& rho_init, const RateParams& params,
                            std::span<const double> grid, const IntegratorOptions& opts = {}) {
  const auto& space = rho_init.space();
  check_params(model, space, params, opts.tolerances);
  detail::check_grid(grid);
  if (is_normalized(model) && std::abs(rho_init.trace() - 1.0) > opts.tolerances.trace_tol)
    throw InvalidArgument(std::string(to_string(model)) + ": initial state must have unit trace");

  auto f = [&](double /*t*/, const Matrix& y) -> Matrix {
    return detail::evaluate(model, space, y, params, opts.tolerances);
  };

  Trajectory traj;
  traj.model = model;
  traj.times.reserve(grid.size());
  traj.states.reserve(grid.size());
  traj.observables.reserve(grid.size());

  auto record = [&](double t, const Matrix& y) {
    DensityMatrix rho(space, y);
    auto obs = observe(rho);
    if (obs.min_eigenvalue < -opts.tolerances.psd_fail)
      throw PositivityViolation("integrate: positivity lost (min eigenvalue " + std::to_string(obs.min_eigenvalue) +
                                ") for " + detail::at_time(model, t));
    traj.times.push_back(t);
    traj.states.push_back(std::move(rho));
    traj.observables.push_back(obs);
  };

  Matrix y = rho_init.matrix();
  record(grid[0], y);

  const double base_step = opts.step_for(params.k_S);
  if (!(base_step > 0.0)) throw InvalidArgument("integrate: dt must be positive");
  double h = std::min(base_step, grid.back());
  double t = 0.0;

  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double target = grid[i];
    try {
      if (opts.method == Method::Rk4Fixed) {
        const double span = target - t;
        const auto n = static_cast<long>(std::max(1.0, std::ceil(span / base_step - 1e-9)));
        const double step = span / static_cast<double>(n);
        for (long s = 0; s < n; ++s) {
          y = rk4_step<Matrix>(y, t, step, f);
          y = hermitian_part(y);
          t = (s + 1 == n) ? target : t + step;
        }
      } else {
        while (t < target) {
          const bool landing = t + h >= target;
          const double step = landing ? target - t : h;
          auto trial = dopri5_step<Matrix>(y, t, step, f);
          const double err = detail::error_norm(trial.error, y, trial.y, opts.rel_tol, opts.abs_tol);
          if (err <= 1.0) {
            t = landing ? target : t + step;
            y = hermitian_part(trial.y);
          }
          const double factor =
              err == 0.0 ? 5.0 : std::clamp(opts.safety * std::pow(err, -0.2), 0.2, 5.0);
          double next = std::min(step * factor, grid.back());
          if (err > 1.0 && next < opts.min_step)
            throw StepSizeUnderflow("integrate: step size fell below " + std::to_string(opts.min_step) + " for " +
                                    detail::at_time(model, t));
          // A short landing step says nothing about the natural step size.
          if (err <= 1.0 && landing) next = std::max(next, h);
          h = std::max(next, opts.min_step);
        }
      }
    } catch (const ModelSingular& e) {
      throw ModelSingular(std::string(e.what()) + " [" + detail::at_time(model, t) + "]");
    } catch (const StepSizeUnderflow&) {
      throw;
    } catch (const InvalidArgument& e) {
      throw IntegrationError(std::string(e.what()) + " [" + detail::at_time(model, t) + "]");
    }
    record(target, y);
  }
  return traj;
}

inline void require_free_evolution(const RateParams& params, double t, const char* who) {
  if (params.hamiltonian) throw InvalidArgument(std::string(who) + ": closed form requires no Hamiltonian");
  if (!(params.k_S >= 0.0)) throw InvalidArgument(std::string(who) + ": k_S must be non-negative");
  if (!(t >= 0.0)) throw InvalidArgument(std::string(who) + ": negative time");
}

/// rho(t) = Q_T rho_0 Q_T + exp(-k_S t) (rho_0 - Q_T rho_0 Q_T)
inline DensityMatrix analytic_jones_hore(const DensityMatrix& rho_init, const RateParams& params, double t) {
  require_free_evolution(params, t, "analytic_jones_hore");
  const auto& space = rho_init.space();
  const Matrix kept = space.project_triplet(rho_init.matrix());
  const double decay = std::exp(-params.k_S * t);
  return DensityMatrix(space, kept + decay * (rho_init.matrix() - kept));
}

/// rho(t) = A rho_0 A with A = exp(-(k_S/2) Q_S t): SS block decays at k_S,
/// singlet-triplet coherences at k_S/2, TT block constant.
inline DensityMatrix analytic_haberkorn(const DensityMatrix& rho_init, const RateParams& params, double t) {
  require_free_evolution(params, t, "analytic_haberkorn");
  const auto& space = rho_init.space();
  const double half = std::exp(-0.5 * params.k_S * t);
  Matrix out = rho_init.matrix();
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const double a = space.is_singlet(static_cast<std::size_t>(i)) ? half : 1.0;
      const double b = space.is_singlet(static_cast<std::size_t>(j)) ? half : 1.0;
      out(i, j) *= a * b;
    }
  return DensityMatrix(space, std::move(out));
}

inline DensityMatrix analytic_jones_hore(const DensityMatrix& rho_init, double k_S, double t) {
  return analytic_jones_hore(rho_init, RateParams{k_S, std::nullopt}, t);
}

inline DensityMatrix analytic_haberkorn(const DensityMatrix& rho_init, double k_S, double t) {
  return analytic_haberkorn(rho_init, RateParams{k_S, std::nullopt}, t);
}

/// Exact propagator for the unnormalized models without a Hamiltonian.
inline DensityMatrix analytic(ModelKind model, const DensityMatrix& rho_init, const RateParams& params, double t) {
  switch (model) {
    case ModelKind::JonesHoreUnnormalized: return analytic_jones_hore(rho_init, params, t);
    case ModelKind::Haberkorn: return analytic_haberkorn(rho_init, params, t);
    default: throw InvalidArgument("analytic: no closed form for " + std::string(to_string(model)));
  }
}

}  // namespace rpkin
