#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <numeric>
#include <string>
#include <vector>

#include "qpl/common.hpp"
#include "qpl/gates.hpp"

// Finite-dimensional state spaces: a type denotes a direct sum of matrix
// algebras, recorded as the ordered list of block dimensions. States are
// tuples of matrices, vectorized block by block (column-major within each
// block). Superoperators are dense transfer matrices on these vectors in the
// Schroedinger picture, with an extra row functional tracking mass lost to
// mu-truncation.

namespace qpl {

struct BlockSpace {
  std::vector<long> blocks;
  mutable std::vector<long> offsets;  // lazy prefix sums of block areas

  long n_blocks() const { return static_cast<long>(blocks.size()); }
  long state_dim() const { return block_offset(n_blocks()); }
  long block_offset(long b) const {
    if (offsets.size() != blocks.size() + 1) {
      offsets.assign(blocks.size() + 1, 0);
      for (size_t i = 0; i < blocks.size(); ++i)
        offsets[i + 1] = offsets[i] + blocks[i] * blocks[i];
    }
    return offsets[b];
  }
  long index(long b, long row, long col) const {
    return block_offset(b) + col * blocks[b] + row;
  }
  bool operator==(const BlockSpace& other) const {
    return blocks == other.blocks;
  }

  static BlockSpace unit() { return BlockSpace{{1}}; }
  static BlockSpace qbit() { return BlockSpace{{2}}; }
  static BlockSpace bits() { return BlockSpace{{1, 1}}; }
  static BlockSpace empty() { return BlockSpace{{}}; }
  static BlockSpace qubits(int n) { return BlockSpace{{1L << n}}; }
};

inline BlockSpace sum_space(const BlockSpace& a, const BlockSpace& b) {
  BlockSpace out = a;
  out.blocks.insert(out.blocks.end(), b.blocks.begin(), b.blocks.end());
  return out;
}

// Lexicographic pairwise products, left factor outer.
inline BlockSpace tensor_space(const BlockSpace& a, const BlockSpace& b) {
  BlockSpace out;
  out.blocks.reserve(a.blocks.size() * b.blocks.size());
  for (long n : a.blocks)
    for (long m : b.blocks) out.blocks.push_back(n * m);
  return out;
}

inline std::string space_to_string(const BlockSpace& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.blocks.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s.blocks[i]);
  }
  return out + "]";
}

struct BlockState {
  BlockSpace space;
  Vector data;  // state_dim entries

  static BlockState zero(const BlockSpace& space) {
    return BlockState{space, Vector::Zero(space.state_dim())};
  }

  Matrix block(long b) const {
    long n = space.blocks[b];
    Matrix m(n, n);
    for (long c = 0; c < n; ++c)
      for (long r = 0; r < n; ++r) m(r, c) = data(space.index(b, r, c));
    return m;
  }

  void set_block(long b, const Matrix& m) {
    long n = space.blocks[b];
    for (long c = 0; c < n; ++c)
      for (long r = 0; r < n; ++r) data(space.index(b, r, c)) = m(r, c);
  }

  double mass() const {
    Complex tr = 0;
    for (long b = 0; b < space.n_blocks(); ++b) {
      long n = space.blocks[b];
      for (long r = 0; r < n; ++r) tr += data(space.index(b, r, r));
    }
    return tr.real();
  }

  // Smallest eigenvalue over all blocks (Hermitian part), for positivity
  // checks on states and state differences.
  double min_block_eigenvalue() const {
    double lo = 0.0;
    for (long b = 0; b < space.n_blocks(); ++b) {
      Matrix m = block(b);
      if (m.rows() == 0) continue;
      Eigen::SelfAdjointEigenSolver<Matrix> es(
          ((m + m.adjoint()) / 2.0).eval());
      lo = std::min(lo, es.eigenvalues().minCoeff());
    }
    return lo;
  }
};

// Row functional taking the total trace of a vectorized state.
inline Eigen::RowVectorXcd trace_row(const BlockSpace& s) {
  Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(s.state_dim());
  for (long b = 0; b < s.n_blocks(); ++b)
    for (long r = 0; r < s.blocks[b]; ++r) row(s.index(b, r, r)) = 1.0;
  return row;
}

struct Superoperator {
  BlockSpace dom, cod;
  Matrix transfer;               // cod.state_dim x dom.state_dim
  Eigen::RowVectorXcd trunc_loss;  // 1 x dom.state_dim

  static Superoperator make(BlockSpace dom, BlockSpace cod, Matrix transfer) {
    Eigen::RowVectorXcd loss = Eigen::RowVectorXcd::Zero(dom.state_dim());
    return Superoperator{std::move(dom), std::move(cod), std::move(transfer),
                         std::move(loss)};
  }

  static Superoperator identity(const BlockSpace& s) {
    return make(s, s, Matrix::Identity(s.state_dim(), s.state_dim()));
  }

  static Superoperator zero(const BlockSpace& dom, const BlockSpace& cod) {
    return make(dom, cod, Matrix::Zero(cod.state_dim(), dom.state_dim()));
  }

  BlockState apply(const BlockState& s) const {
    return BlockState{cod, transfer * s.data};
  }

  Complex loss_on(const Vector& v) const { return (trunc_loss * v)(0); }
};

// g after f, accumulating truncation loss through the composition.
inline Superoperator compose(const Superoperator& g, const Superoperator& f) {
  if (!(g.dom == f.cod))
    fail(Errc::internal_error, "superoperator composition shape mismatch " +
                                   space_to_string(g.dom) + " vs " +
                                   space_to_string(f.cod));
  Superoperator out;
  out.dom = f.dom;
  out.cod = g.cod;
  out.transfer = g.transfer * f.transfer;
  out.trunc_loss = f.trunc_loss + g.trunc_loss * f.transfer;
  return out;
}

inline Superoperator add(const Superoperator& a, const Superoperator& b) {
  if (!(a.dom == b.dom) || !(a.cod == b.cod))
    fail(Errc::internal_error, "superoperator sum shape mismatch");
  Superoperator out = a;
  out.transfer += b.transfer;
  out.trunc_loss += b.trunc_loss;
  return out;
}

inline Superoperator scale(double p, const Superoperator& a) {
  Superoperator out = a;
  out.transfer *= p;
  out.trunc_loss *= p;
  return out;
}

// f (x) g on tensor spaces. The loss formula is exact whenever at least one
// side is lossless, which covers every use here.
inline Superoperator tensor_op(const Superoperator& f, const Superoperator& g) {
  BlockSpace dom = tensor_space(f.dom, g.dom);
  BlockSpace cod = tensor_space(f.cod, g.cod);
  Matrix t = Matrix::Zero(cod.state_dim(), dom.state_dim());
  long nb_gd = g.dom.n_blocks();
  long nb_gc = g.cod.n_blocks();
  for (long fb = 0; fb < f.dom.n_blocks(); ++fb)
    for (long fb2 = 0; fb2 < f.cod.n_blocks(); ++fb2) {
      long fn = f.dom.blocks[fb], fm = f.cod.blocks[fb2];
      for (long fr2 = 0; fr2 < fm; ++fr2)
        for (long fc2 = 0; fc2 < fm; ++fc2)
          for (long fr = 0; fr < fn; ++fr)
            for (long fc = 0; fc < fn; ++fc) {
              Complex wf = f.transfer(f.cod.index(fb2, fr2, fc2),
                                      f.dom.index(fb, fr, fc));
              if (wf == Complex(0, 0)) continue;
              for (long gb = 0; gb < nb_gd; ++gb)
                for (long gb2 = 0; gb2 < nb_gc; ++gb2) {
                  long gn = g.dom.blocks[gb], gm = g.cod.blocks[gb2];
                  for (long gr2 = 0; gr2 < gm; ++gr2)
                    for (long gc2 = 0; gc2 < gm; ++gc2)
                      for (long gr = 0; gr < gn; ++gr)
                        for (long gc = 0; gc < gn; ++gc) {
                          Complex wg = g.transfer(g.cod.index(gb2, gr2, gc2),
                                                  g.dom.index(gb, gr, gc));
                          if (wg == Complex(0, 0)) continue;
                          long dr = dom.index(fb * nb_gd + gb, fr * gn + gr,
                                              fc * gn + gc);
                          long cr = cod.index(fb2 * nb_gc + gb2, fr2 * gm + gr2,
                                              fc2 * gm + gc2);
                          t(cr, dr) += wf * wg;
                        }
                }
            }
    }
  Superoperator out = Superoperator::make(dom, cod, std::move(t));
  // loss(f (x) g) = loss_f (x) tr_g + tr_f (x) loss_g
  Eigen::RowVectorXcd tr_f = trace_row(f.dom);
  Eigen::RowVectorXcd tr_g = trace_row(g.dom);
  for (long fb = 0; fb < f.dom.n_blocks(); ++fb) {
    long fn = f.dom.blocks[fb];
    for (long gb = 0; gb < g.dom.n_blocks(); ++gb) {
      long gn = g.dom.blocks[gb];
      for (long fr = 0; fr < fn; ++fr)
        for (long fc = 0; fc < fn; ++fc)
          for (long gr = 0; gr < gn; ++gr)
            for (long gc = 0; gc < gn; ++gc) {
              long di = dom.index(fb * g.dom.n_blocks() + gb, fr * gn + gr,
                                  fc * gn + gc);
              out.trunc_loss(di) =
                  f.trunc_loss(f.dom.index(fb, fr, fc)) *
                      tr_g(g.dom.index(gb, gr, gc)) +
                  tr_f(f.dom.index(fb, fr, fc)) *
                      g.trunc_loss(g.dom.index(gb, gr, gc));
            }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tensor-factor indexing over lists of block spaces
// ---------------------------------------------------------------------------

// Enumerates the joint space of an ordered factor list. The flat layout
// agrees with folding tensor_space over the list in order.
class FactorIndexer {
 public:
  explicit FactorIndexer(std::vector<BlockSpace> factors)
      : factors_(std::move(factors)) {
    joint_ = BlockSpace::unit();
    for (const auto& f : factors_) joint_ = tensor_space(joint_, f);
  }

  const BlockSpace& joint() const { return joint_; }
  size_t n_factors() const { return factors_.size(); }
  const BlockSpace& factor(size_t i) const { return factors_[i]; }

  // Flat index from per-factor (block, row, col) triples.
  long index(const std::vector<long>& blocks, const std::vector<long>& rows,
             const std::vector<long>& cols) const {
    long b = 0, r = 0, c = 0;
    for (size_t i = 0; i < factors_.size(); ++i) {
      long nb = factors_[i].n_blocks();
      long d = factors_[i].blocks[blocks[i]];
      b = b * nb + blocks[i];
      r = r * d + rows[i];
      c = c * d + cols[i];
    }
    return joint_.index(b, r, c);
  }

  // Iterates over every joint index, decoding the per-factor triples.
  template <typename Fn>
  void for_each(Fn&& fn) const {
    size_t m = factors_.size();
    for (const auto& f : factors_)
      if (f.n_blocks() == 0) return;  // an empty factor collapses the space
    std::vector<long> block_radix(m);
    for (size_t i = 0; i < m; ++i) block_radix[i] = factors_[i].n_blocks();
    std::vector<long> blocks(m, 0), dims(m), cols(m), rows(m);
    bool more_blocks = true;
    while (more_blocks) {
      for (size_t i = 0; i < m; ++i) dims[i] = factors_[i].blocks[blocks[i]];
      std::fill(cols.begin(), cols.end(), 0);
      bool more_cols = true;
      while (more_cols) {
        std::fill(rows.begin(), rows.end(), 0);
        bool more_rows = true;
        while (more_rows) {
          fn(blocks, rows, cols);
          more_rows = increment(rows, dims);
        }
        more_cols = increment(cols, dims);
      }
      more_blocks = increment(blocks, block_radix);
    }
  }

  static bool increment(std::vector<long>& digits,
                        const std::vector<long>& radix) {
    size_t i = digits.size();
    while (i > 0) {
      --i;
      if (++digits[i] < radix[i]) return true;
      digits[i] = 0;
    }
    return false;
  }

 private:
  std::vector<BlockSpace> factors_;
  BlockSpace joint_;
};

// Index map realizing a permutation of tensor factors: entry i of the result
// is the destination of flat index i. perm[i] gives the new position of
// factor i.
inline std::vector<long> factor_permutation_map(
    const std::vector<BlockSpace>& factors, const std::vector<int>& perm) {
  FactorIndexer src(factors);
  std::vector<BlockSpace> dst_factors(factors.size(), BlockSpace::unit());
  for (size_t i = 0; i < factors.size(); ++i) dst_factors[perm[i]] = factors[i];
  FactorIndexer dst(dst_factors);
  std::vector<long> map(src.joint().state_dim(), -1);
  size_t m = factors.size();
  std::vector<long> pb(m), pr(m), pc(m);
  src.for_each([&](const std::vector<long>& blocks,
                   const std::vector<long>& rows,
                   const std::vector<long>& cols) {
    for (size_t i = 0; i < m; ++i) {
      pb[perm[i]] = blocks[i];
      pr[perm[i]] = rows[i];
      pc[perm[i]] = cols[i];
    }
    map[src.index(blocks, rows, cols)] = dst.index(pb, pr, pc);
  });
  return map;
}

inline Superoperator perm_superop(const std::vector<BlockSpace>& factors,
                                  const std::vector<int>& perm) {
  std::vector<long> map = factor_permutation_map(factors, perm);
  std::vector<BlockSpace> dst_factors(factors.size(), BlockSpace::unit());
  for (size_t i = 0; i < factors.size(); ++i) dst_factors[perm[i]] = factors[i];
  BlockSpace dom = BlockSpace::unit();
  for (const auto& f : factors) dom = tensor_space(dom, f);
  BlockSpace cod = BlockSpace::unit();
  for (const auto& f : dst_factors) cod = tensor_space(cod, f);
  Matrix t = Matrix::Zero(cod.state_dim(), dom.state_dim());
  for (long i = 0; i < static_cast<long>(map.size()); ++i)
    if (map[i] >= 0) t(map[i], i) = 1.0;
  return Superoperator::make(dom, cod, std::move(t));
}

// Permutation of n qubits inside a single 2^n block: slot i (MSB first) moves
// to slot perm[i].
inline Superoperator qubit_perm_superop(int n, const std::vector<int>& perm) {
  std::vector<BlockSpace> factors(n, BlockSpace::qbit());
  Superoperator p = perm_superop(factors, perm);
  return p;
}

// ---------------------------------------------------------------------------
// Atomic maps (Schroedinger picture)
// ---------------------------------------------------------------------------

// left / right coproduct injections.
inline Superoperator inj_superop(const BlockSpace& a, const BlockSpace& b,
                                 bool left) {
  BlockSpace cod = sum_space(a, b);
  const BlockSpace& dom = left ? a : b;
  long shift = left ? 0 : a.n_blocks();
  Matrix t = Matrix::Zero(cod.state_dim(), dom.state_dim());
  for (long blk = 0; blk < dom.n_blocks(); ++blk) {
    long n = dom.blocks[blk];
    for (long r = 0; r < n; ++r)
      for (long c = 0; c < n; ++c)
        t(cod.index(blk + shift, r, c), dom.index(blk, r, c)) = 1.0;
  }
  return Superoperator::make(dom, cod, std::move(t));
}

// Component projection out of a direct sum (the transpose of the injection);
// mass in the other component is dropped, which is sound only inside case
// analysis where the other projection is taken too.
inline Superoperator proj_superop(const BlockSpace& a, const BlockSpace& b,
                                  bool left) {
  Superoperator inj = inj_superop(a, b, left);
  Superoperator out =
      Superoperator::make(sum_space(a, b), left ? a : b,
                          inj.transfer.transpose());
  return out;
}

// meas: M_2 -> C (+) C, rho |-> (rho_00, rho_11).
inline Superoperator meas_superop() {
  BlockSpace dom = BlockSpace::qbit();
  BlockSpace cod = BlockSpace::bits();
  Matrix t = Matrix::Zero(2, 4);
  t(0, dom.index(0, 0, 0)) = 1.0;
  t(1, dom.index(0, 1, 1)) = 1.0;
  return Superoperator::make(dom, cod, std::move(t));
}

// new_rho for a fresh |0><0| qubit: C -> M_2, a |-> a |0><0|.
inline Superoperator new_qubit_superop() {
  BlockSpace dom = BlockSpace::unit();
  BlockSpace cod = BlockSpace::qbit();
  Matrix t = Matrix::Zero(4, 1);
  t(cod.index(0, 0, 0), 0) = 1.0;
  return Superoperator::make(dom, cod, std::move(t));
}

// States rho in M_{2^n} as maps C -> M_{2^n}.
inline Superoperator new_state_superop(const Matrix& rho) {
  long d = rho.rows();
  BlockSpace cod{{d}};
  Matrix t(d * d, 1);
  for (long c = 0; c < d; ++c)
    for (long r = 0; r < d; ++r) t(c * d + r, 0) = rho(r, c);
  return Superoperator::make(BlockSpace::unit(), cod, std::move(t));
}

// unitary_S: rho |-> S rho S^dagger on a single 2^k block; the transfer on
// column-major vectorized states is conj(S) (x) S.
inline Superoperator unitary_superop(const Matrix& u) {
  long d = u.rows();
  BlockSpace s{{d}};
  Matrix t(d * d, d * d);
  for (long r1 = 0; r1 < d; ++r1)
    for (long c1 = 0; c1 < d; ++c1)
      for (long r2 = 0; r2 < d; ++r2)
        for (long c2 = 0; c2 < d; ++c2)
          t(c1 * d + r1, c2 * d + r2) = std::conj(u(c1, c2)) * u(r1, r2);
  return Superoperator::make(s, s, std::move(t));
}

// tr: total trace, A -> C.
inline Superoperator trace_superop(const BlockSpace& s) {
  Matrix t = trace_row(s);
  return Superoperator::make(s, BlockSpace::unit(), std::move(t));
}

// The distributivity iso d: Gamma (x) (A + B) -> (Gamma (x) A) + (Gamma (x) B)
// as a block reindexing.
inline Superoperator dist_superop(const BlockSpace& gamma, const BlockSpace& a,
                                  const BlockSpace& b) {
  BlockSpace dom = tensor_space(gamma, sum_space(a, b));
  BlockSpace cod =
      sum_space(tensor_space(gamma, a), tensor_space(gamma, b));
  long na = a.n_blocks(), nb = b.n_blocks();
  Matrix t = Matrix::Zero(cod.state_dim(), dom.state_dim());
  for (long g = 0; g < gamma.n_blocks(); ++g)
    for (long j = 0; j < na + nb; ++j) {
      long src_block = g * (na + nb) + j;
      long dst_block =
          j < na ? g * na + j : gamma.n_blocks() * na + g * nb + (j - na);
      long n = dom.blocks[src_block];
      for (long r = 0; r < n; ++r)
        for (long c = 0; c < n; ++c)
          t(cod.index(dst_block, r, c), dom.index(src_block, r, c)) = 1.0;
    }
  return Superoperator::make(dom, cod, std::move(t));
}

// ---------------------------------------------------------------------------
// CP / trace-nonincreasing validation
// ---------------------------------------------------------------------------

struct ValidationReport {
  bool cp = true;
  bool trace_nonincreasing = true;
  double min_choi_eig = 0.0;
  double max_dual_unit_eig = 1.0;
};

inline constexpr double kChoiTol = 1e-9;

// Complete positivity holds iff every (input-block, output-block) component
// has a positive semidefinite Choi matrix; trace-nonincrease is dual-unit
// dominance per input block.
inline ValidationReport validate(const Superoperator& s) {
  ValidationReport report;
  double min_eig = 0.0;
  for (long a = 0; a < s.dom.n_blocks(); ++a) {
    long n = s.dom.blocks[a];
    for (long b = 0; b < s.cod.n_blocks(); ++b) {
      long m = s.cod.blocks[b];
      if (n == 0 || m == 0) continue;
      // Choi = sum_{ij} E_ij (x) f(E_ij)
      Matrix choi = Matrix::Zero(n * m, n * m);
      for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j)
          for (long r = 0; r < m; ++r)
            for (long c = 0; c < m; ++c)
              choi(i * m + r, j * m + c) =
                  s.transfer(s.cod.index(b, r, c), s.dom.index(a, i, j));
      Eigen::SelfAdjointEigenSolver<Matrix> es(
          ((choi + choi.adjoint()) / 2.0).eval());
      double asym = (choi - choi.adjoint()).cwiseAbs().maxCoeff();
      double lo = es.eigenvalues().minCoeff() - asym;
      min_eig = std::min(min_eig, lo);
    }
  }
  report.min_choi_eig = min_eig;
  report.cp = min_eig >= -kChoiTol;

  // Dual applied to the codomain identity, checked <= 1 per input block.
  Eigen::RowVectorXcd dual_unit = trace_row(s.cod) * s.transfer;
  double max_eig = 0.0;
  for (long a = 0; a < s.dom.n_blocks(); ++a) {
    long n = s.dom.blocks[a];
    if (n == 0) continue;
    Matrix x(n, n);
    for (long r = 0; r < n; ++r)
      for (long c = 0; c < n; ++c)
        // dual_unit as a functional row; the element it represents has
        // entries conj-transposed back into matrix form
        x(r, c) = std::conj(dual_unit(s.dom.index(a, r, c)));
    Eigen::SelfAdjointEigenSolver<Matrix> es(((x + x.adjoint()) / 2.0).eval());
    max_eig = std::max(max_eig, es.eigenvalues().maxCoeff());
  }
  report.max_dual_unit_eig = max_eig;
  report.trace_nonincreasing = max_eig <= 1.0 + kChoiTol;
  return report;
}

// ---------------------------------------------------------------------------
// Index maps: permutations, injections and projections are all maps sending
// each basis vector to one basis vector (or to zero). Composing with them by
// gathering and scattering avoids dense matrix products.
// ---------------------------------------------------------------------------

// entry i holds the destination index of basis vector i, or -1 for dropped
using IndexMap = std::vector<long>;

inline IndexMap index_of_transfer(const Superoperator& s) {
  IndexMap map(s.dom.state_dim(), -1);
  for (long c = 0; c < s.transfer.cols(); ++c)
    for (long r = 0; r < s.transfer.rows(); ++r)
      if (s.transfer(r, c) != Complex(0, 0)) {
        map[c] = r;
        break;
      }
  return map;
}

// first then second
inline IndexMap compose_index(const IndexMap& second, const IndexMap& first) {
  IndexMap out(first.size(), -1);
  for (size_t i = 0; i < first.size(); ++i)
    if (first[i] >= 0) out[i] = second[first[i]];
  return out;
}

inline IndexMap invert_index(const IndexMap& map, long cod_dim) {
  IndexMap out(cod_dim, -1);
  for (size_t i = 0; i < map.size(); ++i)
    if (map[i] >= 0) out[map[i]] = static_cast<long>(i);
  return out;
}

// f composed after an index map m : dom' -> dom(f): column gather.
inline Superoperator gather_cols(const Superoperator& f, const IndexMap& m,
                                 BlockSpace dom) {
  Superoperator out;
  out.dom = std::move(dom);
  out.cod = f.cod;
  out.transfer = Matrix::Zero(f.transfer.rows(), m.size());
  out.trunc_loss = Eigen::RowVectorXcd::Zero(m.size());
  for (size_t i = 0; i < m.size(); ++i)
    if (m[i] >= 0) {
      out.transfer.col(i) = f.transfer.col(m[i]);
      out.trunc_loss(i) = f.trunc_loss(m[i]);
    }
  return out;
}

// An index map m : cod(f) -> cod' composed after f: row scatter.
inline Superoperator scatter_rows(const IndexMap& m, BlockSpace cod,
                                  const Superoperator& f) {
  Superoperator out;
  out.dom = f.dom;
  out.cod = std::move(cod);
  out.transfer = Matrix::Zero(out.cod.state_dim(), f.transfer.cols());
  out.trunc_loss = f.trunc_loss;
  for (size_t r = 0; r < m.size(); ++r)
    if (m[r] >= 0) out.transfer.row(m[r]) = f.transfer.row(r);
  return out;
}

inline Superoperator superop_of_index(const IndexMap& m, BlockSpace dom,
                                      BlockSpace cod) {
  Superoperator out = Superoperator::zero(dom, cod);
  for (size_t i = 0; i < m.size(); ++i)
    if (m[i] >= 0) out.transfer(m[i], i) = 1.0;
  return out;
}

// Index forms of the coproduct injections, component projections and the
// distributivity iso.
inline IndexMap inj_index(const BlockSpace& a, const BlockSpace& b, bool left) {
  BlockSpace cod = sum_space(a, b);
  const BlockSpace& dom = left ? a : b;
  long shift = left ? 0 : a.n_blocks();
  IndexMap map(dom.state_dim(), -1);
  for (long blk = 0; blk < dom.n_blocks(); ++blk) {
    long n = dom.blocks[blk];
    for (long r = 0; r < n; ++r)
      for (long c = 0; c < n; ++c)
        map[dom.index(blk, r, c)] = cod.index(blk + shift, r, c);
  }
  return map;
}

inline IndexMap proj_index(const BlockSpace& a, const BlockSpace& b,
                           bool left) {
  return invert_index(inj_index(a, b, left), sum_space(a, b).state_dim());
}

inline IndexMap dist_index(const BlockSpace& gamma, const BlockSpace& a,
                           const BlockSpace& b) {
  BlockSpace dom = tensor_space(gamma, sum_space(a, b));
  BlockSpace cod = sum_space(tensor_space(gamma, a), tensor_space(gamma, b));
  long na = a.n_blocks(), nb = b.n_blocks();
  IndexMap map(dom.state_dim(), -1);
  for (long g = 0; g < gamma.n_blocks(); ++g)
    for (long j = 0; j < na + nb; ++j) {
      long src_block = g * (na + nb) + j;
      long dst_block =
          j < na ? g * na + j : gamma.n_blocks() * na + g * nb + (j - na);
      long n = dom.blocks[src_block];
      for (long r = 0; r < n; ++r)
        for (long c = 0; c < n; ++c)
          map[dom.index(src_block, r, c)] = cod.index(dst_block, r, c);
    }
  return map;
}

inline double superop_distance(const Superoperator& a, const Superoperator& b) {
  if (!(a.dom == b.dom) || !(a.cod == b.cod))
    fail(Errc::internal_error, "superoperator distance shape mismatch");
  if (a.transfer.size() == 0) return 0.0;
  return (a.transfer - b.transfer).cwiseAbs().maxCoeff();
}

}  // namespace qpl
