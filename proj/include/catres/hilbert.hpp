#pragma once

// Truncated-Fock-space operator algebra for multimode bosonic systems.
//
// Basis indices are row-major over the declared mode order: the last mode
// varies fastest. Operators are kept sparse internally; dense() gives the
// full matrix when needed.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "catres/errors.hpp"

namespace catres {

using Complex = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using DenseMatrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

}  // namespace catres

namespace catres::hilbert {

enum class Role { optical, mechanical };

struct Mode {
  std::string label;
  int dim = 2;
  Role role = Role::optical;

  bool operator==(const Mode&) const = default;
};

/// Ordered set of bosonic modes with their truncation dimensions.
class ModeLayout {
 public:
  ModeLayout() = default;

  explicit ModeLayout(std::vector<Mode> modes) : modes_(std::move(modes)) {
    if (modes_.empty()) throw ConfigError("mode layout must contain at least one mode");
    for (std::size_t i = 0; i < modes_.size(); ++i) {
      if (modes_[i].dim < 2) {
        throw ConfigError("mode '" + modes_[i].label + "' has dimension " +
                          std::to_string(modes_[i].dim) + "; every mode needs dim >= 2");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (modes_[j].label == modes_[i].label) {
          throw ConfigError("duplicate mode label '" + modes_[i].label + "'");
        }
      }
    }
    strides_.assign(modes_.size(), 1);
    for (std::size_t i = modes_.size() - 1; i > 0; --i) {
      strides_[i - 1] = strides_[i] * static_cast<std::size_t>(modes_[i].dim);
    }
    dim_ = strides_.front() * static_cast<std::size_t>(modes_.front().dim);
  }

  const std::vector<Mode>& modes() const { return modes_; }
  std::size_t size() const { return modes_.size(); }
  std::size_t dim() const { return dim_; }

  bool has_mode(std::string_view label) const {
    return std::any_of(modes_.begin(), modes_.end(),
                       [&](const Mode& m) { return m.label == label; });
  }

  std::size_t mode_index(std::string_view label) const {
    for (std::size_t i = 0; i < modes_.size(); ++i) {
      if (modes_[i].label == label) return i;
    }
    throw ConfigError("unknown mode label '" + std::string(label) + "'");
  }

  const Mode& mode(std::string_view label) const { return modes_[mode_index(label)]; }
  std::size_t stride(std::size_t pos) const { return strides_.at(pos); }

  std::size_t index_of(std::span<const int> occupations) const {
    if (occupations.size() != modes_.size()) {
      throw ShapeError("occupation tuple has " + std::to_string(occupations.size()) +
                       " entries for a layout of " + std::to_string(modes_.size()) + " modes");
    }
    std::size_t index = 0;
    for (std::size_t i = 0; i < modes_.size(); ++i) {
      if (occupations[i] < 0 || occupations[i] >= modes_[i].dim) {
        throw TruncationError("occupation " + std::to_string(occupations[i]) + " of mode '" +
                              modes_[i].label + "' exceeds truncation dim " +
                              std::to_string(modes_[i].dim));
      }
      index += static_cast<std::size_t>(occupations[i]) * strides_[i];
    }
    return index;
  }

  std::size_t index_of(std::initializer_list<int> occupations) const {
    return index_of(std::span<const int>(occupations.begin(), occupations.size()));
  }

  int occupation(std::size_t index, std::size_t pos) const {
    return static_cast<int>((index / strides_[pos]) % static_cast<std::size_t>(modes_[pos].dim));
  }

  std::vector<int> occupations_of(std::size_t index) const {
    std::vector<int> occ(modes_.size());
    for (std::size_t i = 0; i < modes_.size(); ++i) occ[i] = occupation(index, i);
    return occ;
  }

  /// Sub-layout holding the named modes, in this layout's order.
  ModeLayout subset(std::span<const std::string> labels) const {
    if (labels.empty()) throw ConfigError("mode subset must be nonempty");
    std::vector<Mode> kept;
    for (const auto& label : labels) (void)mode_index(label);
    for (const auto& m : modes_) {
      if (std::find(labels.begin(), labels.end(), m.label) != labels.end()) kept.push_back(m);
    }
    return ModeLayout(std::move(kept));
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& m : modes_) out.push_back(m.label);
    return out;
  }

  bool operator==(const ModeLayout& other) const { return modes_ == other.modes_; }

 private:
  std::vector<Mode> modes_;
  std::vector<std::size_t> strides_;
  std::size_t dim_ = 0;
};

inline void require_same_layout(const ModeLayout& a, const ModeLayout& b, const char* what) {
  if (!(a == b)) throw ShapeError(std::string("layout mismatch in ") + what);
}

/// Complex operator on a ModeLayout. Hermiticity is checked, never assumed.
class OperatorMatrix {
 public:
  OperatorMatrix(ModeLayout layout, SparseMatrix matrix)
      : layout_(std::move(layout)), matrix_(std::move(matrix)) {
    const auto n = static_cast<Eigen::Index>(layout_.dim());
    if (matrix_.rows() != n || matrix_.cols() != n) {
      throw ShapeError("operator matrix side does not match layout dimension");
    }
    matrix_.makeCompressed();
  }

  OperatorMatrix(ModeLayout layout, const DenseMatrix& dense)
      : OperatorMatrix(std::move(layout), SparseMatrix(dense.sparseView(Complex(0.0), 0.0))) {}

  const ModeLayout& layout() const { return layout_; }
  const SparseMatrix& sparse() const { return matrix_; }
  DenseMatrix dense() const { return DenseMatrix(matrix_); }
  std::size_t dim() const { return layout_.dim(); }

  Complex element(std::size_t row, std::size_t col) const {
    return matrix_.coeff(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  }

  double max_abs() const {
    double m = 0.0;
    for (Eigen::Index k = 0; k < matrix_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(matrix_, k); it; ++it) m = std::max(m, std::abs(it.value()));
    }
    return m;
  }

  /// Largest entry of |X - X^dagger|.
  double hermiticity_error() const {
    SparseMatrix diff = matrix_ - SparseMatrix(matrix_.adjoint());
    double m = 0.0;
    for (Eigen::Index k = 0; k < diff.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(diff, k); it; ++it) m = std::max(m, std::abs(it.value()));
    }
    return m;
  }

  /// Hermitian within tol, relative to the largest entry (floored at 1).
  bool is_hermitian(double tol = 1e-10) const {
    return hermiticity_error() <= tol * std::max(1.0, max_abs());
  }

  OperatorMatrix adjoint() const { return OperatorMatrix(layout_, SparseMatrix(matrix_.adjoint())); }

  friend OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b) {
    require_same_layout(a.layout_, b.layout_, "operator sum");
    return OperatorMatrix(a.layout_, SparseMatrix(a.matrix_ + b.matrix_));
  }
  friend OperatorMatrix operator-(const OperatorMatrix& a, const OperatorMatrix& b) {
    require_same_layout(a.layout_, b.layout_, "operator difference");
    return OperatorMatrix(a.layout_, SparseMatrix(a.matrix_ - b.matrix_));
  }
  friend OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b) {
    require_same_layout(a.layout_, b.layout_, "operator product");
    return OperatorMatrix(a.layout_, SparseMatrix(a.matrix_ * b.matrix_));
  }
  friend OperatorMatrix operator*(Complex c, const OperatorMatrix& a) {
    return OperatorMatrix(a.layout_, SparseMatrix(c * a.matrix_));
  }
  friend OperatorMatrix operator*(const OperatorMatrix& a, Complex c) { return c * a; }

 private:
  ModeLayout layout_;
  SparseMatrix matrix_;
};

inline OperatorMatrix dagger(const OperatorMatrix& x) { return x.adjoint(); }
inline OperatorMatrix compose(const OperatorMatrix& a, const OperatorMatrix& b) { return a * b; }
inline OperatorMatrix add(const OperatorMatrix& a, const OperatorMatrix& b) { return a + b; }
inline OperatorMatrix scale(const OperatorMatrix& a, Complex c) { return c * a; }
inline OperatorMatrix commutator(const OperatorMatrix& a, const OperatorMatrix& b) {
  return a * b - b * a;
}

inline OperatorMatrix identity(const ModeLayout& layout) {
  SparseMatrix id(static_cast<Eigen::Index>(layout.dim()), static_cast<Eigen::Index>(layout.dim()));
  id.setIdentity();
  return OperatorMatrix(layout, std::move(id));
}

inline OperatorMatrix zero(const ModeLayout& layout) {
  const auto n = static_cast<Eigen::Index>(layout.dim());
  return OperatorMatrix(layout, SparseMatrix(n, n));
}

/// Lowering operator on one mode, identity elsewhere: <n-1|a|n> = sqrt(n).
inline OperatorMatrix annihilation(const ModeLayout& layout, std::string_view label) {
  const std::size_t pos = layout.mode_index(label);
  const std::size_t stride = layout.stride(pos);
  std::vector<Eigen::Triplet<Complex>> entries;
  entries.reserve(layout.dim());
  for (std::size_t i = 0; i < layout.dim(); ++i) {
    const int n = layout.occupation(i, pos);
    if (n == 0) continue;
    entries.emplace_back(static_cast<Eigen::Index>(i - stride), static_cast<Eigen::Index>(i),
                         Complex(std::sqrt(static_cast<double>(n)), 0.0));
  }
  const auto d = static_cast<Eigen::Index>(layout.dim());
  SparseMatrix m(d, d);
  m.setFromTriplets(entries.begin(), entries.end());
  return OperatorMatrix(layout, std::move(m));
}

inline OperatorMatrix creation(const ModeLayout& layout, std::string_view label) {
  return dagger(annihilation(layout, label));
}

inline OperatorMatrix number(const ModeLayout& layout, std::string_view label) {
  const auto a = annihilation(layout, label);
  return dagger(a) * a;
}

/// State vector on a ModeLayout.
class PureState {
 public:
  PureState(ModeLayout layout, Vector amplitudes)
      : layout_(std::move(layout)), amplitudes_(std::move(amplitudes)) {
    if (static_cast<std::size_t>(amplitudes_.size()) != layout_.dim()) {
      throw ShapeError("state vector length does not match layout dimension");
    }
  }

  static PureState normalized(ModeLayout layout, Vector amplitudes) {
    const double n = amplitudes.norm();
    if (n == 0.0) throw ContractError("cannot normalize a zero state vector");
    return PureState(std::move(layout), amplitudes / n);
  }

  const ModeLayout& layout() const { return layout_; }
  const Vector& amplitudes() const { return amplitudes_; }
  std::size_t dim() const { return layout_.dim(); }
  double norm() const { return amplitudes_.norm(); }

  /// <this|other>
  Complex inner(const PureState& other) const {
    require_same_layout(layout_, other.layout_, "inner product");
    return amplitudes_.dot(other.amplitudes_);
  }

 private:
  ModeLayout layout_;
  Vector amplitudes_;
};

/// Density matrix on a ModeLayout.
class MixedState {
 public:
  MixedState(ModeLayout layout, DenseMatrix rho) : layout_(std::move(layout)), rho_(std::move(rho)) {
    const auto n = static_cast<Eigen::Index>(layout_.dim());
    if (rho_.rows() != n || rho_.cols() != n) {
      throw ShapeError("density matrix side does not match layout dimension");
    }
  }

  static MixedState from_pure(const PureState& psi) {
    return MixedState(psi.layout(), psi.amplitudes() * psi.amplitudes().adjoint());
  }

  static MixedState normalized(ModeLayout layout, DenseMatrix rho) {
    const Complex tr = rho.trace();
    if (std::abs(tr) == 0.0) throw ContractError("cannot normalize a zero density matrix");
    return MixedState(std::move(layout), rho / tr.real());
  }

  const ModeLayout& layout() const { return layout_; }
  const DenseMatrix& rho() const { return rho_; }
  std::size_t dim() const { return layout_.dim(); }
  double trace() const { return rho_.trace().real(); }

  double hermiticity_error() const { return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff(); }

  double min_eigenvalue() const {
    const DenseMatrix h = 0.5 * (rho_ + rho_.adjoint());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  /// trace 1 within 1e-8, Hermitian within 1e-10, eigenvalues >= -1e-8.
  bool is_valid(double trace_tol = 1e-8, double herm_tol = 1e-10, double eig_floor = -1e-8) const {
    return std::abs(trace() - 1.0) <= trace_tol && hermiticity_error() <= herm_tol &&
           min_eigenvalue() >= eig_floor;
  }

 private:
  ModeLayout layout_;
  DenseMatrix rho_;
};

inline Complex expectation(const OperatorMatrix& op, const PureState& psi) {
  require_same_layout(op.layout(), psi.layout(), "expectation value");
  return psi.amplitudes().dot(op.sparse() * psi.amplitudes());
}

inline Complex expectation(const OperatorMatrix& op, const MixedState& rho) {
  require_same_layout(op.layout(), rho.layout(), "expectation value");
  return (op.sparse() * rho.rho()).trace();
}

inline PureState fock_state(const ModeLayout& layout, std::span<const int> occupations) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(layout.dim()));
  v(static_cast<Eigen::Index>(layout.index_of(occupations))) = 1.0;
  return PureState(layout, std::move(v));
}

inline PureState fock_state(const ModeLayout& layout, std::initializer_list<int> occupations) {
  return fock_state(layout, std::span<const int>(occupations.begin(), occupations.size()));
}

/// Poisson mass sum_{n >= from} e^{-mean} mean^n / n!.
inline double poisson_tail(double mean, int from) {
  if (from <= 0) return 1.0;
  if (mean == 0.0) return 0.0;
  // Sum upward from the first omitted term until the terms stop mattering.
  double log_term = -mean + from * std::log(mean) - std::lgamma(from + 1.0);
  double sum = 0.0;
  for (int n = from; n < from + 100000; ++n) {
    const double term = std::exp(log_term);
    sum += term;
    if (n > mean && term < 1e-18 * sum) break;
    if (n > mean && term == 0.0) break;
    log_term += std::log(mean) - std::log(n + 1.0);
  }
  return sum;
}

/// Smallest truncation whose omitted coherent-state mass is below tail_tol.
inline int required_dim(Complex alpha, double tail_tol) {
  const double mean = std::norm(alpha);
  int d = 2;
  while (poisson_tail(mean, d) >= tail_tol) ++d;
  return d;
}

/// Single-mode coherent amplitudes c_n = e^{-|a|^2/2} a^n / sqrt(n!), renormalized.
inline Vector coherent_amplitudes(int dim, Complex alpha, double tail_tol = 1e-8) {
  const double mean = std::norm(alpha);
  const double tail = poisson_tail(mean, dim);
  if (tail >= tail_tol) {
    throw TruncationError("coherent state |alpha|=" + std::to_string(std::abs(alpha)) +
                          " loses " + std::to_string(tail) + " of its mass at dim " +
                          std::to_string(dim) + "; requires dim >= " +
                          std::to_string(required_dim(alpha, tail_tol)));
  }
  Vector c(dim);
  const double r = std::abs(alpha);
  const double phase = std::arg(alpha);
  for (int n = 0; n < dim; ++n) {
    if (r == 0.0) {
      c(n) = n == 0 ? 1.0 : 0.0;
      continue;
    }
    const double log_mag = -0.5 * mean + n * std::log(r) - 0.5 * std::lgamma(n + 1.0);
    c(n) = std::polar(std::exp(log_mag), n * phase);
  }
  return c / c.norm();
}

/// Coherent state on one mode with every other mode in vacuum.
inline PureState coherent_state(const ModeLayout& layout, std::string_view label, Complex alpha,
                                double tail_tol = 1e-8) {
  const std::size_t pos = layout.mode_index(label);
  const Vector c = coherent_amplitudes(layout.modes()[pos].dim, alpha, tail_tol);
  Vector v = Vector::Zero(static_cast<Eigen::Index>(layout.dim()));
  for (int n = 0; n < c.size(); ++n) {
    v(static_cast<Eigen::Index>(static_cast<std::size_t>(n) * layout.stride(pos))) = c(n);
  }
  return PureState(layout, std::move(v));
}

/// |a> (x) |b> with the layouts concatenated in order.
inline PureState tensor(const PureState& a, const PureState& b) {
  std::vector<Mode> modes = a.layout().modes();
  for (const auto& m : b.layout().modes()) modes.push_back(m);
  Vector v(static_cast<Eigen::Index>(a.dim() * b.dim()));
  for (Eigen::Index i = 0; i < a.amplitudes().size(); ++i) {
    v.segment(i * b.amplitudes().size(), b.amplitudes().size()) = a.amplitudes()(i) * b.amplitudes();
  }
  return PureState(ModeLayout(std::move(modes)), std::move(v));
}

namespace detail {

// Splits every full index into (kept index, traced index).
struct TraceSplit {
  ModeLayout kept;
  std::vector<std::size_t> kept_index;
  std::vector<std::size_t> traced_index;
  std::size_t traced_dim = 1;
};

inline TraceSplit split_indices(const ModeLayout& layout, std::span<const std::string> keep) {
  TraceSplit s{layout.subset(keep), {}, {}, 1};
  std::vector<bool> is_kept(layout.size(), false);
  for (const auto& label : keep) is_kept[layout.mode_index(label)] = true;
  for (std::size_t m = 0; m < layout.size(); ++m) {
    if (!is_kept[m]) s.traced_dim *= static_cast<std::size_t>(layout.modes()[m].dim);
  }
  s.kept_index.resize(layout.dim());
  s.traced_index.resize(layout.dim());
  for (std::size_t i = 0; i < layout.dim(); ++i) {
    std::size_t k = 0;
    std::size_t r = 0;
    for (std::size_t m = 0; m < layout.size(); ++m) {
      const auto d = static_cast<std::size_t>(layout.modes()[m].dim);
      const auto n = static_cast<std::size_t>(layout.occupation(i, m));
      if (is_kept[m]) {
        k = k * d + n;
      } else {
        r = r * d + n;
      }
    }
    s.kept_index[i] = k;
    s.traced_index[i] = r;
  }
  return s;
}

}  // namespace detail

inline MixedState partial_trace(const PureState& psi, std::span<const std::string> keep) {
  const auto split = detail::split_indices(psi.layout(), keep);
  DenseMatrix block = DenseMatrix::Zero(static_cast<Eigen::Index>(split.kept.dim()),
                                        static_cast<Eigen::Index>(split.traced_dim));
  for (std::size_t i = 0; i < psi.dim(); ++i) {
    block(static_cast<Eigen::Index>(split.kept_index[i]),
          static_cast<Eigen::Index>(split.traced_index[i])) = psi.amplitudes()(static_cast<Eigen::Index>(i));
  }
  return MixedState(split.kept, block * block.adjoint());
}

inline MixedState partial_trace(const MixedState& rho, std::span<const std::string> keep) {
  const auto split = detail::split_indices(rho.layout(), keep);
  std::vector<std::vector<std::size_t>> by_traced(split.traced_dim);
  for (std::size_t i = 0; i < rho.dim(); ++i) by_traced[split.traced_index[i]].push_back(i);
  const auto n = static_cast<Eigen::Index>(split.kept.dim());
  DenseMatrix out = DenseMatrix::Zero(n, n);
  for (const auto& group : by_traced) {
    for (std::size_t i : group) {
      for (std::size_t j : group) {
        out(static_cast<Eigen::Index>(split.kept_index[i]), static_cast<Eigen::Index>(split.kept_index[j])) +=
            rho.rho()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
  }
  return MixedState(split.kept, std::move(out));
}

inline MixedState partial_trace(const PureState& psi, std::initializer_list<std::string> keep) {
  return partial_trace(psi, std::span<const std::string>(keep.begin(), keep.size()));
}
inline MixedState partial_trace(const MixedState& rho, std::initializer_list<std::string> keep) {
  return partial_trace(rho, std::span<const std::string>(keep.begin(), keep.size()));
}

}  // namespace catres::hilbert
