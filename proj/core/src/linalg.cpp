#include "gmmpower/linalg.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "gmmpower/error.hpp"

namespace gmmpower {
namespace {

void require_square_symmetric(const Matrix& a, const char* what) {
  if (a.rows() != a.cols())
    throw DimensionMismatch(std::string(what) + ": matrix is " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + ", expected square");
  if (!all_finite(a)) throw InvalidParameter(std::string(what) + ": matrix has non-finite entries");
  const double scale = a.cwiseAbs().maxCoeff();
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(scale, std::numeric_limits<double>::min()))
    throw InvalidParameter(std::string(what) + ": matrix is not symmetric");
}

}  // namespace

bool all_finite(const Matrix& m) { return m.allFinite(); }

SpdFactor::SpdFactor(const Matrix& a) {
  require_square_symmetric(a, "cholesky");
  const Eigen::Index n = a.rows();
  lower_ = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - lower_.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d))
      throw SingularMatrix("matrix is not positive definite", static_cast<std::size_t>(j));
    const double ljj = std::sqrt(d);
    lower_(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      lower_(i, j) = (a(i, j) - lower_.row(i).head(j).dot(lower_.row(j).head(j))) / ljj;
    }
  }
}

Matrix SpdFactor::solve(const Matrix& b) const {
  if (b.rows() != lower_.rows())
    throw DimensionMismatch("cholesky solve: right-hand side has " + std::to_string(b.rows()) +
                            " rows, expected " + std::to_string(lower_.rows()));
  Matrix x = lower_.triangularView<Eigen::Lower>().solve(b);
  lower_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

Vector SpdFactor::solve(const Vector& b) const {
  Matrix x = solve(Matrix(b));
  return x.col(0);
}

Matrix SpdFactor::inverse() const {
  Matrix inv = solve(Matrix(Matrix::Identity(size(), size())));
  return 0.5 * (inv + inv.transpose());
}

Matrix solve_spd(const Matrix& a, const Matrix& b) { return SpdFactor(a).solve(b); }

Matrix invert_spd(const Matrix& a) { return SpdFactor(a).inverse(); }

double quadratic_form(const Vector& v, const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() != v.size())
    throw DimensionMismatch("quadratic_form: vector length " + std::to_string(v.size()) +
                            " does not match " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  return v.dot(a * v);
}

double condition_number_symmetric(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

NullSpace null_space(const Matrix& h) {
  NullSpace out;
  const Eigen::Index p = h.cols();
  Eigen::ColPivHouseholderQR<Matrix> rank_qr(h);
  out.rank = rank_qr.rank();
  // Householder QR of H^T: the trailing p - s columns of Q span null(H).
  Eigen::HouseholderQR<Matrix> qr(h.transpose());
  Matrix q = qr.householderQ() * Matrix::Identity(p, p);
  out.basis = q.rightCols(p - std::min<Eigen::Index>(h.rows(), p));
  return out;
}

}  // namespace gmmpower
