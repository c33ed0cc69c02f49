#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <set>
#include <vector>

#include "qpl/common.hpp"
#include "qpl/gates.hpp"

// Dense density-matrix operations for the operational semantics. Qubit 1 is
// the leftmost (most significant) tensor factor; new qubits append on the
// right, so "new qbit" allocates pointer dim(rho)+1.

namespace qpl {

inline constexpr int kDefaultMaxQubits = 12;
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kPsdTol = 1e-10;

struct DensityMatrix {
  int n_qubits = 0;
  Matrix data;  // 2^n x 2^n

  static DensityMatrix scalar(double mass) {
    DensityMatrix rho;
    rho.n_qubits = 0;
    rho.data = Matrix::Constant(1, 1, Complex(mass, 0));
    return rho;
  }

  long dim() const { return 1L << n_qubits; }
  double trace() const { return data.trace().real(); }
};

// Debug-mode validation: Hermitian, positive semidefinite, trace in [0,1].
inline void validate_density(const DensityMatrix& rho) {
  if (rho.data.rows() != rho.dim() || rho.data.cols() != rho.dim())
    fail(Errc::internal_error, "density matrix has wrong shape");
  if ((rho.data - rho.data.adjoint()).cwiseAbs().maxCoeff() > kHermitianTol)
    fail(Errc::internal_error, "density matrix is not Hermitian");
  double tr = rho.trace();
  if (tr < -kHermitianTol || tr > 1.0 + kHermitianTol)
    fail(Errc::internal_error, "density matrix trace outside [0, 1]");
  Eigen::SelfAdjointEigenSolver<Matrix> es(
      ((rho.data + rho.data.adjoint()) / 2.0).eval());
  if (es.eigenvalues().minCoeff() < -kPsdTol)
    fail(Errc::internal_error, "density matrix is not positive semidefinite");
}

// rho (x) |0><0|, appending one qubit on the right.
inline DensityMatrix new_qubit(const DensityMatrix& rho,
                               int max_qubits = kDefaultMaxQubits) {
  if (rho.n_qubits + 1 > max_qubits)
    fail(Errc::capacity_exceeded,
         "allocating qubit " + std::to_string(rho.n_qubits + 1) +
             " exceeds the configured maximum of " + std::to_string(max_qubits));
  long d = rho.dim();
  DensityMatrix out;
  out.n_qubits = rho.n_qubits + 1;
  out.data = Matrix::Zero(2 * d, 2 * d);
  for (long r = 0; r < d; ++r)
    for (long c = 0; c < d; ++c) out.data(2 * r, 2 * c) = rho.data(r, c);
  return out;
}

namespace detail {

// Bit position of 1-based qubit m (MSB-first convention).
inline int bit_shift(int n_qubits, int m) { return n_qubits - m; }

inline void check_targets(const DensityMatrix& rho,
                          const std::vector<int>& targets, int arity) {
  if (static_cast<int>(targets.size()) != arity)
    fail(Errc::arity_mismatch,
         "gate of arity " + std::to_string(arity) + " applied to " +
             std::to_string(targets.size()) + " qubits");
  std::set<int> seen;
  for (int m : targets) {
    if (m < 1 || m > rho.n_qubits)
      fail(Errc::index_out_of_range,
           "qubit " + std::to_string(m) + " out of range 1.." +
               std::to_string(rho.n_qubits));
    if (!seen.insert(m).second)
      fail(Errc::duplicate_target,
           "qubit " + std::to_string(m) + " listed twice");
  }
}

// A <- U_emb * A where U acts on `targets` (first target = most significant
// gate input) and identity elsewhere.
inline void mult_left_embedded(const Matrix& u, const std::vector<int>& targets,
                               int n_qubits, Matrix& a) {
  int k = static_cast<int>(targets.size());
  long d = 1L << n_qubits;
  long span = 1L << k;
  std::vector<long> masks(k);
  for (int i = 0; i < k; ++i)
    masks[i] = 1L << bit_shift(n_qubits, targets[i]);
  long full_mask = 0;
  for (long m : masks) full_mask |= m;

  Vector in(span), out(span);
  for (long base = 0; base < d; ++base) {
    if (base & full_mask) continue;  // enumerate rows with target bits clear
    for (long col = 0; col < d; ++col) {
      for (long t = 0; t < span; ++t) {
        long row = base;
        for (int i = 0; i < k; ++i)
          if (t & (1L << (k - 1 - i))) row |= masks[i];
        in(t) = a(row, col);
      }
      out.noalias() = u * in;
      for (long t = 0; t < span; ++t) {
        long row = base;
        for (int i = 0; i < k; ++i)
          if (t & (1L << (k - 1 - i))) row |= masks[i];
        a(row, col) = out(t);
      }
    }
  }
}

}  // namespace detail

// S_m(rho) = U_emb rho U_emb^dagger with U embedded at `targets` (1-based).
inline DensityMatrix apply_unitary(const DensityMatrix& rho, const Gate& gate,
                                   const std::vector<int>& targets) {
  detail::check_targets(rho, targets, gate.arity);
  DensityMatrix out = rho;
  detail::mult_left_embedded(gate.matrix, targets, rho.n_qubits, out.data);
  // rho S^dagger = (S rho^dagger)^dagger
  Matrix tmp = out.data.adjoint();
  detail::mult_left_embedded(gate.matrix, targets, rho.n_qubits, tmp);
  out.data = tmp.adjoint();
  return out;
}

// _m<i| rho |i>_m: project qubit m onto |i> and remove it. The trace of the
// result is the probability mass of the outcome.
inline DensityMatrix project_measure(const DensityMatrix& rho, int m,
                                     int outcome) {
  if (m < 1 || m > rho.n_qubits)
    fail(Errc::index_out_of_range,
         "qubit " + std::to_string(m) + " out of range 1.." +
             std::to_string(rho.n_qubits));
  int shift = detail::bit_shift(rho.n_qubits, m);
  long low_mask = (1L << shift) - 1;
  long d_out = rho.dim() / 2;
  auto expand = [&](long idx) {
    long high = idx >> shift;
    long low = idx & low_mask;
    return (high << (shift + 1)) | (static_cast<long>(outcome) << shift) | low;
  };
  DensityMatrix out;
  out.n_qubits = rho.n_qubits - 1;
  out.data = Matrix::Zero(d_out, d_out);
  for (long r = 0; r < d_out; ++r)
    for (long c = 0; c < d_out; ++c)
      out.data(r, c) = rho.data(expand(r), expand(c));
  return out;
}

// Trace out the listed qubits; remaining qubits keep their relative order.
inline DensityMatrix partial_trace(const DensityMatrix& rho,
                                   const std::set<int>& qubits) {
  for (int q : qubits)
    if (q < 1 || q > rho.n_qubits)
      fail(Errc::index_out_of_range,
           "qubit " + std::to_string(q) + " out of range 1.." +
               std::to_string(rho.n_qubits));
  if (qubits.empty()) return rho;

  int n = rho.n_qubits;
  std::vector<int> keep_shifts, drop_shifts;
  for (int q = 1; q <= n; ++q) {
    int s = detail::bit_shift(n, q);
    if (qubits.count(q))
      drop_shifts.push_back(s);
    else
      keep_shifts.push_back(s);
  }
  long d_out = 1L << keep_shifts.size();
  long d_env = 1L << drop_shifts.size();
  auto build = [&](long kept, long dropped) {
    long idx = 0;
    for (size_t i = 0; i < keep_shifts.size(); ++i)
      if (kept & (1L << (keep_shifts.size() - 1 - i))) idx |= 1L << keep_shifts[i];
    for (size_t i = 0; i < drop_shifts.size(); ++i)
      if (dropped & (1L << (drop_shifts.size() - 1 - i)))
        idx |= 1L << drop_shifts[i];
    return idx;
  };
  DensityMatrix out;
  out.n_qubits = n - static_cast<int>(drop_shifts.size());
  out.data = Matrix::Zero(d_out, d_out);
  for (long r = 0; r < d_out; ++r)
    for (long c = 0; c < d_out; ++c) {
      Complex sum = 0;
      for (long e = 0; e < d_env; ++e)
        sum += rho.data(build(r, e), build(c, e));
      out.data(r, c) = sum;
    }
  return out;
}

// gamma_n = (|0..0> + |1..1>)(<0..0| + <1..1|) / 2, the n-qubit GHZ state.
inline DensityMatrix ghz_state(int n, int max_qubits = kDefaultMaxQubits) {
  if (n < 1) fail(Errc::index_out_of_range, "ghz_state needs n >= 1");
  if (n > max_qubits)
    fail(Errc::capacity_exceeded,
         "ghz_state(" + std::to_string(n) + ") exceeds the qubit capacity");
  long d = 1L << n;
  DensityMatrix out;
  out.n_qubits = n;
  out.data = Matrix::Zero(d, d);
  out.data(0, 0) = 0.5;
  out.data(0, d - 1) = 0.5;
  out.data(d - 1, 0) = 0.5;
  out.data(d - 1, d - 1) = 0.5;
  return out;
}

}  // namespace qpl
