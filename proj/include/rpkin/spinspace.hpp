#pragma once

// Spin Hilbert space with singlet/triplet projectors, density matrices and
// the handful of observables every other module is phrased in.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rpkin/errors.hpp"

namespace rpkin {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

struct Tolerances {
  double herm_tol = 1e-9;   // Hermiticity deviation above this warns
  double herm_fail = 1e-5;  // ... and above this fails
  double psd_warn = 1e-9;   // min eigenvalue below -psd_warn warns
  double psd_fail = 1e-6;   // ... and below -psd_fail fails
  double trace_tol = 1e-9;
  double trace_floor = 1e-12;
};

inline constexpr Tolerances kDefaultTolerances{};

/// Basis-aligned spin space. The singlet subspace is spanned by a subset of
/// basis vectors and the triplet subspace by the complement, so both
/// projectors are 0/1 diagonal and their algebra is exact.
///
/// Copies share the immutable payload.
class SpinSpace {
 public:
  SpinSpace(std::size_t dim, std::vector<std::size_t> singlet_indices) {
    if (dim == 0) throw InvalidArgument("SpinSpace: dim must be positive");
    std::sort(singlet_indices.begin(), singlet_indices.end());
    if (std::adjacent_find(singlet_indices.begin(), singlet_indices.end()) != singlet_indices.end())
      throw InvalidArgument("SpinSpace: singlet indices must be distinct");
    if (singlet_indices.empty()) throw InvalidArgument("SpinSpace: singlet subspace is empty");
    if (singlet_indices.back() >= dim)
      throw InvalidArgument("SpinSpace: singlet index " + std::to_string(singlet_indices.back()) +
                            " out of range for dim " + std::to_string(dim));
    if (singlet_indices.size() == dim) throw InvalidArgument("SpinSpace: no triplet subspace left");

    auto data = std::make_shared<Data>();
    data->dim = dim;
    data->singlet = std::move(singlet_indices);
    data->is_singlet.assign(dim, false);
    for (auto i : data->singlet) data->is_singlet[i] = true;
    for (std::size_t i = 0; i < dim; ++i)
      if (!data->is_singlet[i]) data->triplet.push_back(i);

    const auto n = static_cast<Eigen::Index>(dim);
    data->q_s = Matrix::Zero(n, n);
    data->q_t = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < dim; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      (data->is_singlet[i] ? data->q_s : data->q_t)(k, k) = 1.0;
    }
    data_ = std::move(data);
  }

  /// {|S>, |T>}: the minimal two-level space.
  static SpinSpace two_level() { return SpinSpace(2, {0}); }
  /// {|S>, |T+>, |T0>, |T->}: two electron spins.
  static SpinSpace electron_pair() { return SpinSpace(4, {0}); }

  std::size_t dim() const noexcept { return data_->dim; }
  Eigen::Index rows() const noexcept { return static_cast<Eigen::Index>(data_->dim); }
  const std::vector<std::size_t>& singlet_indices() const noexcept { return data_->singlet; }
  const std::vector<std::size_t>& triplet_indices() const noexcept { return data_->triplet; }
  bool is_singlet(std::size_t i) const { return data_->is_singlet[i]; }
  const Matrix& singlet_projector() const noexcept { return data_->q_s; }
  const Matrix& triplet_projector() const noexcept { return data_->q_t; }

  /// Q_T m Q_T, evaluated by masking.
  Matrix project_triplet(const Matrix& m) const {
    Matrix out = Matrix::Zero(m.rows(), m.cols());
    for (auto i : data_->triplet)
      for (auto j : data_->triplet) out(idx(i), idx(j)) = m(idx(i), idx(j));
    return out;
  }

  /// Q_S m Q_S
  Matrix project_singlet(const Matrix& m) const {
    Matrix out = Matrix::Zero(m.rows(), m.cols());
    for (auto i : data_->singlet)
      for (auto j : data_->singlet) out(idx(i), idx(j)) = m(idx(i), idx(j));
    return out;
  }

  /// Tr(Q_S m), real part.
  double singlet_trace(const Matrix& m) const {
    double s = 0.0;
    for (auto i : data_->singlet) s += m(idx(i), idx(i)).real();
    return s;
  }

  /// Tr(Q_T m) = Tr(Q_T m Q_T), real part.
  double triplet_trace(const Matrix& m) const {
    double s = 0.0;
    for (auto i : data_->triplet) s += m(idx(i), idx(i)).real();
    return s;
  }

  void require_shape(const Matrix& m, const char* what) const {
    if (m.rows() != rows() || m.cols() != rows())
      throw DimensionMismatch(std::string(what) + ": expected " + std::to_string(dim()) + "x" +
                              std::to_string(dim()) + " matrix, got " + std::to_string(m.rows()) +
                              "x" + std::to_string(m.cols()));
  }

  friend bool operator==(const SpinSpace& a, const SpinSpace& b) {
    return a.data_ == b.data_ || (a.dim() == b.dim() && a.singlet_indices() == b.singlet_indices());
  }

 private:
  struct Data {
    std::size_t dim = 0;
    std::vector<std::size_t> singlet;
    std::vector<std::size_t> triplet;
    std::vector<bool> is_singlet;
    Matrix q_s;
    Matrix q_t;
  };

  static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

  std::shared_ptr<const Data> data_;
};

inline SpinSpace make_space(std::size_t dim, std::vector<std::size_t> singlet_indices) {
  return SpinSpace(dim, std::move(singlet_indices));
}

/// A spin density matrix tied to its space. Construction only checks the
/// shape; physical validity is reported by validate() and enforced by
/// DensityMatrix::checked().
class DensityMatrix {
 public:
  DensityMatrix(SpinSpace space, Matrix entries) : space_(std::move(space)), entries_(std::move(entries)) {
    space_.require_shape(entries_, "DensityMatrix");
  }

  static DensityMatrix checked(SpinSpace space, Matrix entries,
                               const Tolerances& tol = kDefaultTolerances);

  const SpinSpace& space() const noexcept { return space_; }
  const Matrix& matrix() const noexcept { return entries_; }
  std::size_t dim() const noexcept { return space_.dim(); }
  double trace() const { return entries_.trace().real(); }

 private:
  SpinSpace space_;
  Matrix entries_;
};

/// max |A - A^dagger|
inline double hermiticity_deviation(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

/// Smallest eigenvalue of the Hermitian part.
inline double min_eigenvalue(const Matrix& m) {
  const Matrix herm = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(herm, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

/// (m + m^dagger) / 2
inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

enum class Verdict { Pass, Warn, Fail };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Warn: return "warn";
    case Verdict::Fail: return "fail";
  }
  return "?";
}

struct Validation {
  double hermiticity = 0.0;
  double min_eigenvalue = 0.0;
  double trace = 0.0;
  Verdict verdict = Verdict::Pass;
  std::string message;  // first reason for a non-pass verdict
};

inline Validation validate(const Matrix& m, const Tolerances& tol = kDefaultTolerances) {
  Validation v;
  v.hermiticity = hermiticity_deviation(m);
  v.min_eigenvalue = min_eigenvalue(m);
  v.trace = m.trace().real();

  auto escalate = [&v](Verdict level, std::string why) {
    if (static_cast<int>(level) > static_cast<int>(v.verdict)) {
      v.verdict = level;
      v.message = std::move(why);
    }
  };
  if (v.hermiticity > tol.herm_fail)
    escalate(Verdict::Fail, "not Hermitian (deviation " + std::to_string(v.hermiticity) + ")");
  else if (v.hermiticity > tol.herm_tol)
    escalate(Verdict::Warn, "Hermiticity deviation " + std::to_string(v.hermiticity));
  if (v.min_eigenvalue < -tol.psd_fail)
    escalate(Verdict::Fail, "not positive semidefinite (min eigenvalue " +
                                std::to_string(v.min_eigenvalue) + ")");
  else if (v.min_eigenvalue < -tol.psd_warn)
    escalate(Verdict::Warn, "min eigenvalue " + std::to_string(v.min_eigenvalue));
  if (!(v.trace > 0.0) || v.trace > 1.0 + tol.trace_tol)
    escalate(Verdict::Fail, "trace " + std::to_string(v.trace) + " outside (0, 1]");
  return v;
}

inline Validation validate(const DensityMatrix& rho, const Tolerances& tol = kDefaultTolerances) {
  return validate(rho.matrix(), tol);
}

inline DensityMatrix DensityMatrix::checked(SpinSpace space, Matrix entries, const Tolerances& tol) {
  DensityMatrix rho(std::move(space), std::move(entries));
  const auto v = validate(rho.matrix(), tol);
  if (v.verdict == Verdict::Fail) throw InvalidArgument("invalid density matrix: " + v.message);
  return rho;
}

inline DensityMatrix normalize(const DensityMatrix& rho, double trace_floor = kDefaultTolerances.trace_floor) {
  const double tr = rho.trace();
  if (!(tr > trace_floor))
    throw NormalizationSingular("normalize: trace " + std::to_string(tr) +
                                " at or below floor; no surviving pairs");
  return DensityMatrix(rho.space(), rho.matrix() / tr);
}

inline double singlet_probability(const DensityMatrix& rho) { return rho.space().singlet_trace(rho.matrix()); }
inline double triplet_probability(const DensityMatrix& rho) { return rho.space().triplet_trace(rho.matrix()); }

inline double frobenius_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("frobenius_distance: shapes differ");
  return (a - b).norm();
}

inline double frobenius_distance(const DensityMatrix& a, const DensityMatrix& b) {
  return frobenius_distance(a.matrix(), b.matrix());
}

/// G G^dagger / Tr(G G^dagger) with G drawn from a seeded standard complex
/// Ginibre ensemble. Full rank with probability one.
inline DensityMatrix random_density_matrix(const SpinSpace& space, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = space.rows();
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      g(i, j) = Complex(re, im);
    }
  Matrix rho = g * g.adjoint();
  rho = hermitian_part(rho);
  rho /= rho.trace().real();
  return DensityMatrix(space, std::move(rho));
}

// Named states ---------------------------------------------------------------

/// |s><s| on the first singlet basis vector.
inline DensityMatrix pure_singlet(const SpinSpace& space) {
  Matrix m = Matrix::Zero(space.rows(), space.rows());
  const auto s = static_cast<Eigen::Index>(space.singlet_indices().front());
  m(s, s) = 1.0;
  return DensityMatrix(space, std::move(m));
}

/// |t><t| on the first triplet basis vector.
inline DensityMatrix pure_triplet(const SpinSpace& space) {
  Matrix m = Matrix::Zero(space.rows(), space.rows());
  const auto t = static_cast<Eigen::Index>(space.triplet_indices().front());
  m(t, t) = 1.0;
  return DensityMatrix(space, std::move(m));
}

/// Diagonal state with singlet weight 1 - p_T spread evenly over the singlet
/// basis and p_T spread evenly over the triplet basis.
inline DensityMatrix diagonal_mixture(const SpinSpace& space, double p_T) {
  if (!(p_T >= 0.0 && p_T <= 1.0)) throw InvalidArgument("diagonal_mixture: p_T outside [0, 1]");
  Matrix m = Matrix::Zero(space.rows(), space.rows());
  const double ws = (1.0 - p_T) / static_cast<double>(space.singlet_indices().size());
  const double wt = p_T / static_cast<double>(space.triplet_indices().size());
  for (auto i : space.singlet_indices()) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = ws;
  for (auto i : space.triplet_indices()) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = wt;
  return DensityMatrix(space, std::move(m));
}

inline DensityMatrix equal_mixture(const SpinSpace& space) { return diagonal_mixture(space, 0.5); }

/// (|s> + |t>)/sqrt(2) on the first singlet and triplet basis vectors.
inline DensityMatrix st_superposition(const SpinSpace& space) {
  Matrix m = Matrix::Zero(space.rows(), space.rows());
  const auto s = static_cast<Eigen::Index>(space.singlet_indices().front());
  const auto t = static_cast<Eigen::Index>(space.triplet_indices().front());
  m(s, s) = m(t, t) = m(s, t) = m(t, s) = 0.5;
  return DensityMatrix(space, std::move(m));
}

}  // namespace rpkin
