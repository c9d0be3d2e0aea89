#include "ldsb/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ldsb/error.hpp"

namespace ldsb {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_)
    throw Error(ErrorKind::ShapeError, "Matrix: data length does not match rows*cols");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error(ErrorKind::ShapeError, "Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vector Matrix::col(std::size_t j) const {
  Vector v(rows_);
  for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
  return v;
}

void Matrix::set_col(std::size_t j, std::span<const double> v) {
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double Matrix::frobenius_norm() const { return norm2(data_); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw Error(ErrorKind::ShapeError, "Matrix +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw Error(ErrorKind::ShapeError, "Matrix -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorKind::ShapeError, "matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  constexpr std::size_t kBlock = 512;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t j0 = 0; j0 < b.cols(); j0 += kBlock) {
      const std::size_t j1 = std::min(b.cols(), j0 + kBlock);
      for (std::size_t k = 0; k < a.cols(); ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        const double* bk = b.row(k).data();
        for (std::size_t j = j0; j < j1; ++j) ci[j] += aik * bk[j];
      }
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw Error(ErrorKind::ShapeError, "matmul_nt: inner dimensions differ");
  return matmul(a, b.transpose());
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw Error(ErrorKind::ShapeError, "matmul_tn: inner dimensions differ");
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto ak = a.row(k);
    auto bk = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ak[i];
      if (aki == 0.0) continue;
      auto ci = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw Error(ErrorKind::ShapeError, "matvec: size mismatch");
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

double norm2(std::span<const double> a) {
  // Scaled accumulation so tiny and huge entries do not under/overflow.
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double s = 0.0;
  for (double v : a) {
    const double t = v / scale;
    s += t * t;
  }
  return scale * std::sqrt(s);
}

namespace {

struct TallSvd {
  Matrix cols;  // r x m: row j holds U(:, j) * S(j) before normalization
  Matrix v;     // r x n: row j holds V(:, j)
};

// One-sided (Hestenes) Jacobi on the columns of a tall matrix. Columns are
// stored as rows of `at` so every rotation touches contiguous memory.
TallSvd jacobi_tall(const Matrix& m) {
  const std::size_t n = m.cols();
  Matrix at = m.transpose();
  Matrix v = Matrix::identity(n);
  constexpr double eps = 1e-15;
  for (int sweep = 0; sweep < 80; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto ap = at.row(p);
        auto aq = at.row(q);
        const double alpha = dot(ap, ap);
        const double beta = dot(aq, aq);
        const double gamma = dot(ap, aq);
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < ap.size(); ++i) {
          const double x = ap[i];
          const double y = aq[i];
          ap[i] = c * x - s * y;
          aq[i] = s * x + c * y;
        }
        auto vp = v.row(p);
        auto vq = v.row(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double x = vp[i];
          const double y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }
  return {std::move(at), std::move(v)};
}

// Fill rows of `basis` flagged in `missing` so all rows are orthonormal.
void complete_basis(Matrix& basis, const std::vector<bool>& missing) {
  const std::size_t dim = basis.cols();
  std::size_t next_axis = 0;
  for (std::size_t j = 0; j < basis.rows(); ++j) {
    if (!missing[j]) continue;
    while (next_axis < dim) {
      Vector cand(dim, 0.0);
      cand[next_axis++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < basis.rows(); ++k) {
          if (k == j || (missing[k] && k > j)) continue;
          auto bk = basis.row(k);
          const double proj = dot(bk, cand);
          for (std::size_t i = 0; i < dim; ++i) cand[i] -= proj * bk[i];
        }
      }
      const double nrm = norm2(cand);
      if (nrm > 1e-6) {
        auto bj = basis.row(j);
        for (std::size_t i = 0; i < dim; ++i) bj[i] = cand[i] / nrm;
        break;
      }
    }
  }
}

}  // namespace

SvdResult svd(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) throw Error(ErrorKind::InvalidInput, "svd: empty matrix");
  if (!m.all_finite()) throw Error(ErrorKind::InvalidInput, "svd: non-finite entries");

  const bool wide = m.rows() < m.cols();
  TallSvd tall = jacobi_tall(wide ? m.transpose() : m);
  const std::size_t r = tall.cols.rows();

  Vector s(r);
  for (std::size_t j = 0; j < r; ++j) s[j] = norm2(tall.cols.row(j));
  std::vector<std::size_t> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });

  // left: r x (tall rows), right: r x (tall cols), both stored as rows.
  Matrix left(r, tall.cols.cols());
  Matrix right(r, tall.v.cols());
  Vector sorted(r);
  std::vector<bool> missing(r, false);
  for (std::size_t k = 0; k < r; ++k) {
    const std::size_t j = order[k];
    sorted[k] = s[j];
    auto dst = left.row(k);
    auto src = tall.cols.row(j);
    if (s[j] > 1e-300) {
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] / s[j];
    } else {
      sorted[k] = 0.0;
      missing[k] = true;
    }
    std::copy(tall.v.row(j).begin(), tall.v.row(j).end(), right.row(k).begin());
  }
  complete_basis(left, missing);

  // For a wide input the roles swap: M^T = L S R^T, so M = R S L^T.
  Matrix& u_rows = wide ? right : left;
  Matrix& v_rows = wide ? left : right;

  for (std::size_t k = 0; k < r; ++k) {
    auto vk = v_rows.row(k);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < vk.size(); ++i)
      if (std::abs(vk[i]) > std::abs(vk[arg])) arg = i;
    if (vk[arg] < 0.0) {
      for (auto& x : vk) x = -x;
      for (auto& x : u_rows.row(k)) x = -x;
    }
  }
  return {u_rows.transpose(), std::move(sorted), std::move(v_rows)};
}

Vector singular_values(const Matrix& m) { return svd(m).S; }

Matrix orthonormalize(const Matrix& q) {
  const std::size_t n = q.rows();
  const std::size_t k = q.cols();
  if (k > n) throw Error(ErrorKind::DegenerateBasis, "orthonormalize: more columns than rows");
  if (!q.all_finite()) throw Error(ErrorKind::InvalidInput, "orthonormalize: non-finite entries");
  Matrix cols = q.transpose();
  for (std::size_t j = 0; j < k; ++j) {
    auto cj = cols.row(j);
    const double original = norm2(cj);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < j; ++i) {
        auto ci = cols.row(i);
        const double proj = dot(ci, cj);
        for (std::size_t t = 0; t < n; ++t) cj[t] -= proj * ci[t];
      }
    }
    const double nrm = norm2(cj);
    if (original == 0.0 || nrm <= 1e-10 * original)
      throw Error(ErrorKind::DegenerateBasis, "orthonormalize: columns are linearly dependent");
    for (auto& x : cj) x /= nrm;
  }
  return cols.transpose();
}

}  // namespace ldsb
