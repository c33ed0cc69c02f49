#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <map>
#include <string>

#include "qpl/common.hpp"

namespace qpl {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kUnitaryTol = 1e-12;

struct Gate {
  std::string name;
  int arity = 1;
  Matrix matrix;  // 2^arity x 2^arity unitary
};

inline bool is_unitary(const Matrix& m, double tol = kUnitaryTol) {
  if (m.rows() != m.cols()) return false;
  Matrix d = m.adjoint() * m - Matrix::Identity(m.rows(), m.cols());
  return d.cwiseAbs().maxCoeff() <= tol;
}

// Built-in single and two qubit gates plus user-registered matrices.
// The two-qubit matrices are written in the |first, second| basis with the
// first listed variable as the most significant qubit.
class GateRegistry {
 public:
  GateRegistry() {
    const double s = 1.0 / std::sqrt(2.0);
    const Complex i(0, 1);
    add("I", 1, (Matrix(2, 2) << 1, 0, 0, 1).finished());
    add("X", 1, (Matrix(2, 2) << 0, 1, 1, 0).finished());
    add("Y", 1, (Matrix(2, 2) << 0, -i, i, 0).finished());
    add("Z", 1, (Matrix(2, 2) << 1, 0, 0, -1).finished());
    add("H", 1, (Matrix(2, 2) << s, s, s, -s).finished());
    add("S", 1, (Matrix(2, 2) << 1, 0, 0, i).finished());
    add("T", 1,
        (Matrix(2, 2) << 1, 0, 0, std::exp(i * (M_PI / 4))).finished());
    Matrix cnot = Matrix::Zero(4, 4);
    cnot(0, 0) = 1;
    cnot(1, 1) = 1;
    cnot(2, 3) = 1;
    cnot(3, 2) = 1;
    add("CNOT", 2, cnot);
    Matrix cz = Matrix::Identity(4, 4);
    cz(3, 3) = -1;
    add("CZ", 2, cz);
    Matrix swap = Matrix::Zero(4, 4);
    swap(0, 0) = 1;
    swap(1, 2) = 1;
    swap(2, 1) = 1;
    swap(3, 3) = 1;
    add("SWAP", 2, swap);
  }

  void register_gate(const std::string& name, const Matrix& m) {
    int dim = static_cast<int>(m.rows());
    int arity = 0;
    while ((1 << arity) < dim) ++arity;
    if ((1 << arity) != dim || m.cols() != dim)
      fail(Errc::unknown_gate,
           "gate " + name + " matrix must be square with power-of-two size");
    if (!is_unitary(m))
      fail(Errc::unknown_gate, "gate " + name + " matrix is not unitary");
    add(name, arity, m);
  }

  const Gate& gate(const std::string& name) const {
    auto it = gates_.find(name);
    if (it == gates_.end())
      fail(Errc::unknown_gate, "no gate named " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return gates_.count(name) > 0; }

  int arity(const std::string& name) const { return gate(name).arity; }

 private:
  void add(const std::string& name, int arity, Matrix m) {
    gates_[name] = Gate{name, arity, std::move(m)};
  }

  std::map<std::string, Gate> gates_;
};

inline const GateRegistry& builtin_gates() {
  static const GateRegistry registry;
  return registry;
}

}  // namespace qpl
