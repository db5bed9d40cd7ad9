// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are fixed here and not configurable.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rpkin/integrator.hpp"
#include "rpkin/kinetics.hpp"
#include "rpkin/models.hpp"
#include "rpkin/spinspace.hpp"
#include "rpkin/verify.hpp"

using namespace rpkin;

namespace {

constexpr std::size_t kRandomStates = 100;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

std::string fixed(double x, int digits = 6) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

IntegratorOptions rk4(double dt) {
  IntegratorOptions o;
  o.method = Method::Rk4Fixed;
  o.dt = dt;
  return o;
}

const std::vector<ConsistencyReport>& battery_reports() {
  static const std::vector<ConsistencyReport> reports = [] {
    const auto battery = default_battery(1.0, kRandomStates);
    return run_suite(battery);
  }();
  return reports;
}

double max_metric(const std::string& check, const std::function<double(const CheckRecord&)>& f, bool& all_passed) {
  double worst = 0.0;
  for (const auto& r : battery_reports()) {
    const auto& c = r.check(check);
    all_passed = all_passed && c.passed;
    worst = std::max(worst, f(c));
  }
  return worst;
}

// 1 ---------------------------------------------------------------------------
Outcome mixture_identity() {
  bool ok = true;
  const double state = max_metric("mixture-identity", [](const CheckRecord& c) { return c.metric("state_deviation"); }, ok);
  const double flow = max_metric("mixture-identity", [](const CheckRecord& c) { return c.metric("rhs_deviation"); }, ok);
  ok = ok && state <= 1e-8 && flow <= 1e-8;
  return {ok, std::to_string(battery_reports().size()) + " scenarios, max state dev " + sci(state) +
                  ", max rhs dev " + sci(flow) + " (tol 1e-8)"};
}

// 2 ---------------------------------------------------------------------------
Outcome route_equivalence() {
  bool ok = true;
  const double worst = max_metric("route-equivalence", [](const CheckRecord& c) { return c.max_deviation; }, ok);
  ok = ok && worst <= 1e-8;
  return {ok, std::to_string(battery_reports().size()) + " scenarios, max dev " + sci(worst) + " (tol 1e-8)"};
}

// 3 ---------------------------------------------------------------------------
Outcome confirmed_inconsistency() {
  const auto two = SpinSpace::two_level();
  const auto grid = uniform_grid(10.0, 101);
  const std::size_t at1 = 10;
  const auto k = check_kominis_discrepancy(equal_mixture(two), 1.0, grid);
  const auto eq3 = integrate(ModelKind::NormalizedJonesHore, equal_mixture(two), {1.0, std::nullopt}, grid, rk4(1e-3));
  const auto eq4 = integrate(ModelKind::NormalizedKominis, equal_mixture(two), {1.0, std::nullopt}, grid, rk4(1e-3));

  const double corrected = eq3.observables[at1].p_singlet;
  const double disputed = eq4.observables[at1].p_singlet;
  const double diff = corrected - disputed;
  bool ok = std::abs(grid[at1] - 1.0) < 1e-15;
  ok = ok && std::abs(corrected - 0.268941) <= 1e-6 && std::abs(disputed - 0.183940) <= 1e-6;
  ok = ok && std::abs(diff - 0.085001) <= 1e-6;
  ok = ok && std::abs(k.curve[at1].difference - 0.085001) <= 1e-6;
  ok = ok && k.curve.front().difference == 0.0 && k.discrepancy.passed;

  const auto triplet = check_kominis_discrepancy(pure_triplet(two), 1.0, grid);
  double triplet_gap = 0.0;
  for (const auto& p : triplet.curve) triplet_gap = std::max(triplet_gap, std::abs(p.difference));
  ok = ok && triplet_gap == 0.0 && triplet.discrepancy.max_deviation == 0.0;

  return {ok, "p_S(1): corrected " + fixed(corrected) + ", disputed " + fixed(disputed) + ", diff " + fixed(diff) +
                  " (target 0.085001 +- 1e-6); diff(0) = " + sci(k.curve.front().difference) +
                  "; p_T=1 max diff " + sci(triplet_gap)};
}

// 4 ---------------------------------------------------------------------------
Outcome kinetic_closed_forms() {
  const double k_S = 1.0;
  const double h = 1e-3;
  const std::size_t steps = 20000;  // k_S t up to 20
  auto rates = [&](double p_T) {
    return [p_T, k_S](double, const Eigen::Vector2d& f) -> Eigen::Vector2d {
      const auto r = fraction_rates(std::clamp(f(0), 0.0, 1.0), p_T, k_S);
      return {r.df_0, r.df_T};
    };
  };
  double worst_ode = 0.0;
  for (int i = 0; i <= 10; ++i) {
    const double p_T = i / 10.0;
    Eigen::Vector2d f(1.0, 0.0);
    for (std::size_t s = 1; s <= steps; ++s) {
      f = rk4_step<Eigen::Vector2d>(f, 0.0, h, rates(p_T));
      const auto closed = kinetic_fractions(static_cast<double>(s) * h, p_T, k_S);
      worst_ode = std::max({worst_ode, std::abs(f(0) - closed.f_0), std::abs(f(1) - closed.f_T)});
    }
  }

  double worst_survival = 0.0;
  for (const auto& r : battery_reports()) {
    const auto& rho = r.scenario.rho_init;
    const auto mix = mixture_from_initial(rho);
    for (double t = 0.0; t <= 10.0; t += 0.1) {
      const auto f = kinetic_fractions(t, mix.p_T, k_S);
      worst_survival = std::max(worst_survival, std::abs(f.f_0 + f.f_T - analytic_jones_hore(rho, k_S, t).trace()));
    }
  }
  const bool ok = worst_ode <= 1e-10 && worst_survival <= 1e-12;
  return {ok, "rk4 vs closed form " + sci(worst_ode) + " (tol 1e-10); survival identity " + sci(worst_survival) +
                  " (tol 1e-12)"};
}

// 5 ---------------------------------------------------------------------------
Outcome weight_derivative() {
  bool ok = true;
  const double fd = max_metric("weight-derivative", [](const CheckRecord& c) { return c.max_deviation; }, ok);
  const double forms =
      max_metric("weight-derivative", [](const CheckRecord& c) { return c.metric("form_disagreement"); }, ok);
  ok = ok && fd <= 1e-6 && forms <= 1e-13;
  return {ok, "finite difference " + sci(fd) + " (tol 1e-6); algebraic forms " + sci(forms) + " (tol 1e-13)"};
}

// 6 ---------------------------------------------------------------------------
Outcome conservation() {
  double trace_drift = 0.0, min_eig = 0.0, herm = 0.0, trace_law = 0.0;
  const auto grid = uniform_grid(10.0, 101);

  for (const auto& r : battery_reports()) {
    const auto& rho = r.scenario.rho_init;
    const bool kominis_defined = triplet_probability(rho) > 1e-12;
    for (auto model : {ModelKind::NormalizedJonesHore, ModelKind::NormalizedKominis}) {
      if (model == ModelKind::NormalizedKominis && !kominis_defined) continue;
      for (const auto& opts : {rk4(1e-3), IntegratorOptions{}}) {
        const auto traj = integrate(model, rho, {1.0, std::nullopt}, grid, opts);
        for (const auto& o : traj.observables) {
          trace_drift = std::max(trace_drift, std::abs(o.trace - 1.0));
          min_eig = std::min(min_eig, o.min_eigenvalue);
          herm = std::max(herm, o.hermiticity);
        }
      }
    }
  }

  // d(Tr rho)/dt = -k_S Tr(Q_S rho) for the unnormalized flows, with and
  // without a Hamiltonian, by a five-point stencil on a fine snapshot grid.
  const double h = 1e-3;
  const auto fine = uniform_grid(2.0, 2001);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto space = seed % 2 ? SpinSpace::electron_pair() : SpinSpace::two_level();
    const auto rho = random_density_matrix(space, 500 + seed);
    Matrix ham = random_density_matrix(space, 900 + seed).matrix() * 3.0;
    const double k_S = 0.5 + 0.25 * static_cast<double>(seed);
    for (auto model : {ModelKind::JonesHoreUnnormalized, ModelKind::Haberkorn})
      for (bool with_h : {false, true}) {
        RateParams p{k_S, std::nullopt};
        if (with_h) p.hamiltonian = ham;
        const auto traj = integrate(model, rho, p, fine, rk4(h));
        for (std::size_t i = 2; i + 2 < traj.size(); ++i) {
          const auto& o = traj.observables;
          const double d = (-o[i + 2].trace + 8.0 * o[i + 1].trace - 8.0 * o[i - 1].trace + o[i - 2].trace) / (12.0 * h);
          trace_law = std::max(trace_law, std::abs(d + k_S * o[i].p_singlet));
        }
        for (const auto& o : traj.observables) herm = std::max(herm, o.hermiticity);
      }
  }
  const bool ok = trace_drift <= 1e-9 && min_eig >= -1e-9 && trace_law <= 1e-10 && herm <= 1e-12;
  return {ok, "|Tr-1| " + sci(trace_drift) + ", min eig " + sci(min_eig) + " (tol 1e-9); trace law " +
                  sci(trace_law) + " (tol 1e-10); hermiticity " + sci(herm) + " (tol 1e-12)"};
}

// 7 ---------------------------------------------------------------------------
Outcome model_contrast() {
  const auto grid = uniform_grid(10.0, 101);
  double pop_gap = 0.0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto space = seed % 2 ? SpinSpace::electron_pair() : SpinSpace::two_level();
    Matrix m = random_density_matrix(space, seed).matrix().diagonal().asDiagonal();
    const DensityMatrix rho(space, m);
    const auto jh = integrate(ModelKind::JonesHoreUnnormalized, rho, {1.0, std::nullopt}, grid, rk4(1e-3));
    const auto hb = integrate(ModelKind::Haberkorn, rho, {1.0, std::nullopt}, grid, rk4(1e-3));
    for (std::size_t i = 0; i < jh.size(); ++i)
      pop_gap = std::max(pop_gap, (jh.states[i].matrix().diagonal() - hb.states[i].matrix().diagonal())
                                      .cwiseAbs()
                                      .maxCoeff());
  }

  double ratio_err = 0.0, magnitude_err = 0.0;
  for (const auto& space : {SpinSpace::two_level(), SpinSpace::electron_pair()}) {
    const auto rho = st_superposition(space);
    const auto s = static_cast<Eigen::Index>(space.singlet_indices().front());
    const auto t = static_cast<Eigen::Index>(space.triplet_indices().front());
    const double k_S = 1.0;
    const std::vector<double> at{0.0, 1.0 / k_S};
    const auto jh = integrate(ModelKind::JonesHoreUnnormalized, rho, {k_S, std::nullopt}, at, rk4(1e-3));
    const auto hb = integrate(ModelKind::Haberkorn, rho, {k_S, std::nullopt}, at, rk4(1e-3));
    const double c0 = std::abs(rho.matrix()(s, t));
    const double c_jh = std::abs(jh.states[1].matrix()(s, t));
    const double c_hb = std::abs(hb.states[1].matrix()(s, t));
    const double rate_jh = -std::log(c_jh / c0) * k_S;
    const double rate_hb = -std::log(c_hb / c0) * k_S;
    ratio_err = std::max(ratio_err, std::abs(rate_jh / rate_hb - 2.0) / 2.0);
    magnitude_err = std::max(magnitude_err, std::abs((c_hb / c_jh) / std::exp(0.5) - 1.0));
  }
  const bool ok = pop_gap <= 1e-10 && ratio_err <= 1e-6 && magnitude_err <= 1e-6;
  return {ok, "population gap " + sci(pop_gap) + " (tol 1e-10); decay-rate ratio rel err " + sci(ratio_err) +
                  ", magnitude ratio rel err " + sci(magnitude_err) + " (tol 1e-6)"};
}

// 8 ---------------------------------------------------------------------------
Outcome singularity() {
  bool ok = true;
  double eq3_dev = 0.0;
  const auto grid = uniform_grid(10.0, 101);
  for (const auto& space : {SpinSpace::two_level(), SpinSpace::electron_pair()})
    for (const auto& opts : {rk4(1e-3), IntegratorOptions{}}) {
      const auto rho = pure_singlet(space);
      bool raised = false;
      try {
        integrate(ModelKind::NormalizedKominis, rho, {1.0, std::nullopt}, grid, opts);
      } catch (const ModelSingular&) {
        raised = true;
      }
      ok = ok && raised;
      const auto eq3 = integrate(ModelKind::NormalizedJonesHore, rho, {1.0, std::nullopt}, grid, opts);
      for (const auto& st : eq3.states) eq3_dev = std::max(eq3_dev, frobenius_distance(st, rho));
    }
  ok = ok && eq3_dev == 0.0;
  return {ok, std::string("normalized-kominis raised ModelSingular: ") + (ok ? "yes" : "no") +
                  "; normalized-jh deviation from constant " + sci(eq3_dev)};
}

// 9 ---------------------------------------------------------------------------
Outcome integrator_quality() {
  const auto grid = uniform_grid(10.0, 11);
  auto worst_error = [&](const DensityMatrix& rho, const IntegratorOptions& opts, bool relative) {
    const auto traj = integrate(ModelKind::JonesHoreUnnormalized, rho, {1.0, std::nullopt}, grid, opts);
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const auto exact = analytic_jones_hore(rho, 1.0, traj.times[i]);
      const double err = frobenius_distance(traj.states[i], exact);
      worst = std::max(worst, relative ? err / exact.matrix().norm() : err);
    }
    return worst;
  };

  double min_order = 1e9, worst_adaptive = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto space = seed % 2 ? SpinSpace::electron_pair() : SpinSpace::two_level();
    const auto rho = random_density_matrix(space, 300 + seed);
    const double coarse = worst_error(rho, rk4(0.1), false);
    const double fine = worst_error(rho, rk4(0.05), false);
    min_order = std::min(min_order, std::log2(coarse / fine));
    worst_adaptive = std::max(worst_adaptive, worst_error(rho, IntegratorOptions{}, true));
  }
  const bool ok = min_order >= 3.9 && worst_adaptive <= 1e-9;
  return {ok, "min observed rk4 order " + fixed(min_order, 3) + " (>= 3.9); rk45 max relative error " +
                  sci(worst_adaptive) + " (rel_tol 1e-9)"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* title;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"AC1", "mixture identity", mixture_identity},
      {"AC2", "route equivalence", route_equivalence},
      {"AC3", "confirmed inconsistency", confirmed_inconsistency},
      {"AC4", "kinetic closed forms", kinetic_closed_forms},
      {"AC5", "weight-derivative identity", weight_derivative},
      {"AC6", "conservation and structure", conservation},
      {"AC7", "model contrast", model_contrast},
      {"AC8", "singularity behavior", singularity},
      {"AC9", "integrator quality", integrator_quality},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %s %-28s %s  [%.2fs]\n", out.passed ? "PASS" : "FAIL", c.id, c.title, out.detail.c_str(), secs);
    failures += out.passed ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures, std::size(criteria));
  return failures == 0 ? 0 : 1;
}
