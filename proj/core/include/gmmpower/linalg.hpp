#pragma once

#include <Eigen/Dense>

namespace gmmpower {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Lower Cholesky factor of a symmetric positive definite matrix.
// Throws SingularMatrix with the 0-based index of the first non-positive pivot.
class SpdFactor {
 public:
  explicit SpdFactor(const Matrix& a);

  Matrix solve(const Matrix& b) const;
  Vector solve(const Vector& b) const;
  Matrix inverse() const;
  const Matrix& lower() const noexcept { return lower_; }
  Eigen::Index size() const noexcept { return lower_.rows(); }

 private:
  Matrix lower_;
};

// Solves A X = B for symmetric positive definite A. A must be square and
// symmetric to 1e-10 relative; otherwise InvalidParameter is thrown.
Matrix solve_spd(const Matrix& a, const Matrix& b);

// A^{-1} computed as solve_spd(A, I), symmetrized.
Matrix invert_spd(const Matrix& a);

double quadratic_form(const Vector& v, const Matrix& a);

// Ratio of extreme eigenvalues of a symmetric matrix; +inf when the smallest
// eigenvalue is not positive.
double condition_number_symmetric(const Matrix& a);

// Orthonormal basis (as columns) of the null space of a full-row-rank matrix,
// plus its numerical rank. Rank is judged by column-pivoted QR.
struct NullSpace {
  Matrix basis;
  Eigen::Index rank = 0;
};
NullSpace null_space(const Matrix& h);

bool all_finite(const Matrix& m);

}  // namespace gmmpower
