//
// Copyright 2026 The fpca Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Dense kernels: Householder QR, truncated SVD (one-sided Jacobi or a Gram
// eigen route) and the subspace estimate type with its three merge variants.
//
// All singular vectors follow one sign convention: the largest-magnitude
// entry of every left singular column is positive, ties going to the lowest
// row index. Singular values at or below max(rows, cols) * eps * sigma_1 are
// treated as zero and their columns are dropped, so a factorization may
// return fewer columns than the requested rank.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fpca/error.hpp"
#include "fpca/matrix.hpp"

namespace fpca {

template <std::floating_point T>
struct QrFactors {
  BasicMatrix<T> q;
  BasicMatrix<T> r;
};

template <std::floating_point T>
struct SvdFactors {
  BasicMatrix<T> left;
  std::vector<T> values;
  std::optional<BasicMatrix<T>> right;

  std::size_t rank() const noexcept { return values.size(); }
};

// Column count above which truncated_svd switches to the Gram eigen route.
inline constexpr std::size_t kDenseSvdColumnLimit = 512;

namespace detail {

template <std::floating_point T>
T zero_threshold(std::size_t rows, std::size_t cols, T sigma1) {
  return static_cast<T>(std::max(rows, cols)) * std::numeric_limits<T>::epsilon() * sigma1;
}

// Householder QR without pivoting. Tall or square input gives the economy
// factors (Q rows x cols, R cols x cols); wide input gives Q rows x rows and
// R rows x cols. Diagonal of R is non-negative.
template <std::floating_point T>
QrFactors<T> householder_qr(const BasicMatrix<T>& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  const std::size_t k = std::min(m, n);
  if (k == 0) return {BasicMatrix<T>(m, 0), BasicMatrix<T>(0, n)};
  BasicMatrix<T> work = a;
  BasicMatrix<T> reflectors(m, k);
  std::vector<T> vnorm2(k, T{0});

  for (std::size_t j = 0; j < k; ++j) {
    T* x = work.col(j).data();
    T alpha2{0};
    for (std::size_t i = j; i < m; ++i) alpha2 += x[i] * x[i];
    const T alpha = std::sqrt(alpha2);
    if (alpha == T{0}) continue;
    const T s = x[j] >= T{0} ? T{1} : T{-1};
    T* v = reflectors.col(j).data();
    for (std::size_t i = j; i < m; ++i) v[i] = x[i];
    v[j] += s * alpha;
    T vv{0};
    for (std::size_t i = j; i < m; ++i) vv += v[i] * v[i];
    vnorm2[j] = vv;
    for (std::size_t c = j + 1; c < n; ++c) {
      T* y = work.col(c).data();
      T w{0};
      for (std::size_t i = j; i < m; ++i) w += v[i] * y[i];
      const T f = T{2} * w / vv;
      for (std::size_t i = j; i < m; ++i) y[i] -= f * v[i];
    }
    x[j] = -s * alpha;
    for (std::size_t i = j + 1; i < m; ++i) x[i] = T{0};
  }

  BasicMatrix<T> r(k, n);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t i = 0; i <= std::min(c, k - 1); ++i) r(i, c) = work(i, c);

  BasicMatrix<T> q(m, k);
  for (std::size_t i = 0; i < k; ++i) q(i, i) = T{1};
  for (std::size_t jj = k; jj-- > 0;) {
    if (vnorm2[jj] == T{0}) continue;
    const T* v = reflectors.col(jj).data();
    for (std::size_t c = 0; c < k; ++c) {
      T* y = q.col(c).data();
      T w{0};
      for (std::size_t i = jj; i < m; ++i) w += v[i] * y[i];
      const T f = T{2} * w / vnorm2[jj];
      for (std::size_t i = jj; i < m; ++i) y[i] -= f * v[i];
    }
  }

  for (std::size_t i = 0; i < k; ++i) {
    if (r(i, i) < T{0}) {
      for (std::size_t c = i; c < n; ++c) r(i, c) = -r(i, c);
      for (T& v : q.col(i)) v = -v;
    }
  }
  return {std::move(q), std::move(r)};
}

// One-sided (Hestenes) Jacobi: rotates the columns of w until they are
// mutually orthogonal. When v is non-null the same rotations are applied to
// it, so w_out = w_in * v_out.
template <std::floating_point T>
void one_sided_jacobi(BasicMatrix<T>& w, BasicMatrix<T>* v) {
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  const T tol = static_cast<T>(m) * std::numeric_limits<T>::epsilon();
  constexpr int kMaxSweeps = 80;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        T* wp = w.col(p).data();
        T* wq = w.col(q).data();
        T alpha{0}, beta{0}, gamma{0};
        for (std::size_t i = 0; i < m; ++i) {
          alpha += wp[i] * wp[i];
          beta += wq[i] * wq[i];
          gamma += wp[i] * wq[i];
        }
        if (gamma == T{0} || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const T zeta = (beta - alpha) / (T{2} * gamma);
        const T t = (zeta >= T{0} ? T{1} : T{-1}) / (std::abs(zeta) + std::sqrt(T{1} + zeta * zeta));
        const T c = T{1} / std::sqrt(T{1} + t * t);
        const T s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const T a = wp[i];
          const T b = wq[i];
          wp[i] = c * a - s * b;
          wq[i] = s * a + c * b;
        }
        if (v) {
          T* vp = v->col(p).data();
          T* vq = v->col(q).data();
          for (std::size_t i = 0; i < v->rows(); ++i) {
            const T a = vp[i];
            const T b = vq[i];
            vp[i] = c * a - s * b;
            vq[i] = s * a + c * b;
          }
        }
      }
    }
    if (!rotated) return;
  }
}

// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Eigenvalues are
// returned in descending order with matching eigenvector columns.
template <std::floating_point T>
std::pair<std::vector<T>, BasicMatrix<T>> symmetric_eigen(BasicMatrix<T> a) {
  const std::size_t n = a.rows();
  BasicMatrix<T> v = BasicMatrix<T>::identity(n);
  const T norm = a.frobenius_norm();
  const T eps = std::numeric_limits<T>::epsilon();
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    T off{0};
    for (std::size_t q = 1; q < n; ++q)
      for (std::size_t p = 0; p < q; ++p) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= eps * norm) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const T apq = a(p, q);
        if (apq == T{0}) continue;
        const T app = a(p, p);
        const T aqq = a(q, q);
        const T theta = (aqq - app) / (T{2} * apq);
        const T t = (theta >= T{0} ? T{1} : T{-1}) / (std::abs(theta) + std::sqrt(theta * theta + T{1}));
        const T c = T{1} / std::sqrt(t * t + T{1});
        const T s = t * c;
        T* cp = a.col(p).data();
        T* cq = a.col(q).data();
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const T akp = cp[k];
          const T akq = cq[k];
          cp[k] = c * akp - s * akq;
          cq[k] = s * akp + c * akq;
          a(p, k) = cp[k];
          a(q, k) = cq[k];
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = T{0};
        a(q, p) = T{0};
        T* vp = v.col(p).data();
        T* vq = v.col(q).data();
        for (std::size_t k = 0; k < n; ++k) {
          const T x = vp[k];
          const T y = vq[k];
          vp[k] = c * x - s * y;
          vq[k] = s * x + c * y;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  std::vector<T> values(n);
  BasicMatrix<T> vectors(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    values[j] = a(order[j], order[j]);
    std::copy_n(v.col(order[j]).data(), n, vectors.col(j).data());
  }
  return {std::move(values), std::move(vectors)};
}

template <std::floating_point T>
std::vector<std::size_t> descending_order(const std::vector<T>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return values[x] > values[y]; });
  return order;
}

// Copies columns of `src` in `order`, dividing column j by scale[order[j]]
// when scale is non-empty and the divisor is positive.
template <std::floating_point T>
BasicMatrix<T> gather_columns(const BasicMatrix<T>& src, const std::vector<std::size_t>& order,
                              std::span<const T> scale = {}) {
  BasicMatrix<T> out(src.rows(), order.size());
  for (std::size_t j = 0; j < order.size(); ++j) {
    const auto in = src.col(order[j]);
    auto dst = out.col(j);
    const T s = scale.empty() ? T{1} : scale[order[j]];
    if (s > T{0}) {
      for (std::size_t i = 0; i < in.size(); ++i) dst[i] = in[i] / s;
    }
  }
  return out;
}

// Full thin SVD through one-sided Jacobi, QR-preconditioned for
// rectangular input. Values descending, not pruned.
template <std::floating_point T>
SvdFactors<T> dense_svd(const BasicMatrix<T>& a, bool want_right) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  SvdFactors<T> out;
  if (m >= n) {
    std::optional<BasicMatrix<T>> q;
    BasicMatrix<T> w;
    if (m > n) {
      auto qr = householder_qr(a);
      q = std::move(qr.q);
      w = std::move(qr.r);
    } else {
      w = a;
    }
    std::optional<BasicMatrix<T>> v;
    if (want_right) v = BasicMatrix<T>::identity(n);
    one_sided_jacobi(w, v ? &*v : nullptr);
    std::vector<T> sigma(n);
    for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(std::span<const T>(w.col(j)));
    const auto order = descending_order(sigma);
    BasicMatrix<T> u = gather_columns(w, order, std::span<const T>(sigma));
    out.left = q ? multiply(*q, u) : std::move(u);
    for (std::size_t j : order) out.values.push_back(sigma[j]);
    if (v) out.right = gather_columns(*v, order);
  } else {
    // Aᵀ = Q R, R = W Vᵀ  =>  A = V Σ (Q W/σ)ᵀ
    const BasicMatrix<T> at = a.transpose();
    auto qr = householder_qr(at);
    BasicMatrix<T> w = std::move(qr.r);
    BasicMatrix<T> v = BasicMatrix<T>::identity(m);
    one_sided_jacobi(w, &v);
    std::vector<T> sigma(m);
    for (std::size_t j = 0; j < m; ++j) sigma[j] = norm2(std::span<const T>(w.col(j)));
    const auto order = descending_order(sigma);
    out.left = gather_columns(v, order);
    for (std::size_t j : order) out.values.push_back(sigma[j]);
    if (want_right) out.right = multiply(qr.q, gather_columns(w, order, std::span<const T>(sigma)));
  }
  return out;
}

// SVD through the eigen-decomposition of the Gram matrix on the smaller
// side. Returns already pruned factors: eigenvalues at or below the zero
// threshold (applied to λ, not √λ) are dropped.
template <std::floating_point T>
SvdFactors<T> gram_svd(const BasicMatrix<T>& a, bool want_right) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  const bool rows_side = m <= n;
  auto [lambda, vecs] = symmetric_eigen(rows_side ? multiply_nt(a, a) : multiply_tn(a, a));
  const T thr = lambda.empty() ? T{0} : zero_threshold(m, n, std::max(lambda[0], T{0}));
  std::size_t keep = 0;
  while (keep < lambda.size() && lambda[keep] > thr) ++keep;
  SvdFactors<T> out;
  out.values.resize(keep);
  for (std::size_t j = 0; j < keep; ++j) out.values[j] = std::sqrt(lambda[j]);
  BasicMatrix<T> basis = vecs.cols_range(0, keep);
  if (rows_side) {
    out.left = std::move(basis);
    if (want_right) {
      BasicMatrix<T> right = multiply_tn(a, out.left);
      for (std::size_t j = 0; j < keep; ++j)
        for (T& x : right.col(j)) x /= out.values[j];
      out.right = std::move(right);
    }
  } else {
    BasicMatrix<T> left = multiply(a, basis);
    for (std::size_t j = 0; j < keep; ++j)
      for (T& x : left.col(j)) x /= out.values[j];
    out.left = std::move(left);
    if (want_right) out.right = std::move(basis);
  }
  return out;
}

template <std::floating_point T>
void apply_sign_convention(BasicMatrix<T>& left, BasicMatrix<T>* right) {
  for (std::size_t j = 0; j < left.cols(); ++j) {
    auto c = left.col(j);
    std::size_t best = 0;
    for (std::size_t i = 1; i < c.size(); ++i)
      if (std::abs(c[i]) > std::abs(c[best])) best = i;
    if (!c.empty() && c[best] < T{0}) {
      for (T& x : c) x = -x;
      if (right && j < right->cols())
        for (T& x : right->col(j)) x = -x;
    }
  }
}

}  // namespace detail

// Economy QR: A = Q R with Q column-orthonormal (d x n) and R upper
// triangular (n x n) with non-negative diagonal. Requires rows >= cols.
template <std::floating_point T>
QrFactors<T> economy_qr(const BasicMatrix<T>& a) {
  detail::require(a.rows() >= 1 && a.cols() >= 1, "economy_qr: empty matrix");
  detail::require(a.rows() >= a.cols(), "economy_qr: more columns than rows");
  require_finite(a, "economy_qr");
  return detail::householder_qr(a);
}

// The r leading singular triplets of A. Fewer than r are returned when A has
// numerical rank below r. The right factor is only formed on request.
template <std::floating_point T>
SvdFactors<T> truncated_svd(const BasicMatrix<T>& a, std::size_t r, bool want_right = false) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  detail::require(m >= 1 && n >= 1, "truncated_svd: empty matrix");
  detail::require(r >= 1 && r <= std::min(m, n),
                  "truncated_svd: rank " + std::to_string(r) + " out of range [1, " +
                      std::to_string(std::min(m, n)) + "]");
  require_finite(a, "truncated_svd");

  SvdFactors<T> full = n <= kDenseSvdColumnLimit ? detail::dense_svd(a, want_right)
                                                 : detail::gram_svd(a, want_right);
  const T thr = full.values.empty() ? T{0} : detail::zero_threshold(m, n, full.values[0]);
  std::size_t keep = 0;
  while (keep < full.values.size() && keep < r && full.values[keep] > thr) ++keep;

  SvdFactors<T> out;
  out.values.assign(full.values.begin(), full.values.begin() + static_cast<std::ptrdiff_t>(keep));
  out.left = full.left.cols_range(0, keep);
  if (full.right) out.right = full.right->cols_range(0, keep);
  detail::apply_sign_convention(out.left, out.right ? &*out.right : nullptr);
  return out;
}

// An orthonormal basis (d x r) with its singular values, descending and
// non-negative. r = 0 is the empty estimate, which still knows its d.
class SubspaceEstimate {
 public:
  SubspaceEstimate() = default;

  SubspaceEstimate(Matrix basis, Vector values) : basis_(std::move(basis)), values_(std::move(values)) {
    detail::require(basis_.cols() == values_.size(), "SubspaceEstimate: basis/values length mismatch");
    detail::require(values_.size() <= basis_.rows(), "SubspaceEstimate: rank exceeds dimension");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) throw NonFiniteInput("SubspaceEstimate: non-finite value");
      detail::require(values_[i] >= 0.0, "SubspaceEstimate: negative singular value");
      detail::require(i == 0 || values_[i] <= values_[i - 1], "SubspaceEstimate: values not descending");
    }
    require_finite(basis_, "SubspaceEstimate");
  }

  static SubspaceEstimate empty(std::size_t dim) { return SubspaceEstimate(Matrix(dim, 0), {}); }

  static SubspaceEstimate from_svd(SvdFactors<double> f) {
    return SubspaceEstimate(std::move(f.left), std::move(f.values));
  }

  std::size_t dim() const noexcept { return basis_.rows(); }
  std::size_t rank() const noexcept { return values_.size(); }
  bool is_empty() const noexcept { return values_.empty(); }

  const Matrix& basis() const noexcept { return basis_; }
  const Vector& values() const noexcept { return values_; }

  SubspaceEstimate truncated(std::size_t r) const {
    const std::size_t k = std::min(r, rank());
    return SubspaceEstimate(basis_.cols_range(0, k), Vector(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(k)));
  }

  SubspaceEstimate scaled(double s) const {
    detail::require(s >= 0.0, "SubspaceEstimate::scaled: negative factor");
    Vector v = values_;
    for (double& x : v) x *= s;
    return SubspaceEstimate(basis_, std::move(v));
  }

  // basis · diag(values)
  Matrix factor() const { return scale_columns(basis_, std::span<const double>(values_)); }

  // max |(UᵀU − I)_ij|
  double orthonormality_error() const {
    const Matrix g = multiply_tn(basis_, basis_);
    double e = 0.0;
    for (std::size_t j = 0; j < g.cols(); ++j)
      for (std::size_t i = 0; i < g.rows(); ++i) e = std::max(e, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
    return e;
  }

 private:
  Matrix basis_;
  Vector values_;
};

namespace detail {

inline void require_same_dim(const SubspaceEstimate& a, const SubspaceEstimate& b, const char* who) {
  if (a.dim() != b.dim())
    throw InvalidArgument(std::string(who) + ": dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()) + ")");
}

inline void require_merge_rank(std::size_t r, std::size_t d, const char* who) {
  if (r < 1 || r > d)
    throw InvalidArgument(std::string(who) + ": rank " + std::to_string(r) + " out of range [1, " +
                          std::to_string(d) + "]");
}

inline SubspaceEstimate estimate_from_svd(SvdFactors<double> f) {
  return SubspaceEstimate::from_svd(std::move(f));
}

// Left factors of [U1·S1 | U2·S2] truncated to rank r, for orthonormal U1
// and arbitrary U2. This is the projected-residual merge: the second block is
// split into its component in span(U1) and an orthonormal complement Q, and
// only the small core matrix [[S1, Z·S2], [0, R·S2]] is decomposed.
inline SubspaceEstimate merge_factors(const Matrix& u1, const Matrix& s1, Matrix u2, Matrix s2, std::size_t r) {
  const std::size_t d = u1.rows();
  if (u2.cols() > d) {
    // X = U2·S2 is wider than tall. With Xᵀ = Q'R', X = R'ᵀQ'ᵀ has the same
    // left factors and singular values as the d x d matrix R'ᵀ.
    Matrix x = multiply(u2, s2);
    if (x.cols() > d) {
      auto qr = householder_qr(x.transpose());
      u2 = qr.r.transpose();
    } else {
      u2 = std::move(x);
    }
    s2 = Matrix::identity(u2.cols());
  }
  const std::size_t r1 = u1.cols();
  const std::size_t k2 = u2.cols();
  if (r1 == 0) {
    const Matrix x = multiply(u2, s2);
    if (x.cols() == 0) return SubspaceEstimate::empty(d);
    return estimate_from_svd(truncated_svd(x, std::min(r, std::min(x.rows(), x.cols()))));
  }
  if (k2 == 0) {
    const Matrix x = multiply(u1, s1);
    return estimate_from_svd(truncated_svd(x, std::min(r, std::min(x.rows(), x.cols()))));
  }

  Matrix z = multiply_tn(u1, u2);
  Matrix w = u2 - multiply(u1, z);
  // Second projection pass keeps the residual orthogonal to U1 to working
  // precision.
  const Matrix z2 = multiply_tn(u1, w);
  w -= multiply(u1, z2);
  z += z2;
  auto qr = householder_qr(w);

  const std::size_t m1 = s1.cols();
  const std::size_t m2 = s2.cols();
  Matrix core(r1 + k2, m1 + m2);
  for (std::size_t j = 0; j < m1; ++j)
    for (std::size_t i = 0; i < r1; ++i) core(i, j) = s1(i, j);
  const Matrix zs = multiply(z, s2);
  const Matrix rs = multiply(qr.r, s2);
  for (std::size_t j = 0; j < m2; ++j) {
    for (std::size_t i = 0; i < r1; ++i) core(i, m1 + j) = zs(i, j);
    for (std::size_t i = 0; i < k2; ++i) core(r1 + i, m1 + j) = rs(i, j);
  }
  const std::size_t target = std::min(r, std::min(core.rows(), core.cols()));
  auto inner = truncated_svd(core, target);
  const std::size_t k = inner.rank();

  Matrix basis = multiply(u1, inner.left.top_left(r1, k));
  Matrix top = inner.left;  // rows r1.. belong to Q
  Matrix bottom(k2, k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < k2; ++i) bottom(i, j) = top(r1 + i, j);
  basis += multiply(qr.q, bottom);
  apply_sign_convention<double>(basis, nullptr);
  return SubspaceEstimate(std::move(basis), std::move(inner.values));
}

inline Matrix weighted_concat(const SubspaceEstimate& s1, const SubspaceEstimate& s2, double lambda1,
                              double lambda2) {
  Matrix a = s1.factor();
  a *= lambda1;
  Matrix b = s2.factor();
  b *= lambda2;
  return hcat(a, b);
}

inline void require_weights(double lambda1, double lambda2, const char* who) {
  if (!(lambda1 > 0.0 && lambda1 <= 1.0))
    throw InvalidArgument(std::string(who) + ": lambda1 must lie in (0, 1]");
  if (!(lambda2 >= 1.0) || !std::isfinite(lambda2))
    throw InvalidArgument(std::string(who) + ": lambda2 must be >= 1");
}

}  // namespace detail

// Rank-r principal subspace of [U1·Σ1 | U2·Σ2] from the two estimates alone.
// An empty operand is neutral: the other side is truncated to r.
inline SubspaceEstimate merge(const SubspaceEstimate& s1, const SubspaceEstimate& s2, std::size_t r) {
  detail::require_same_dim(s1, s2, "merge");
  detail::require_merge_rank(r, s1.dim(), "merge");
  if (s1.is_empty()) return s2.truncated(r);
  if (s2.is_empty()) return s1.truncated(r);
  return detail::merge_factors(s1.basis(), Matrix::diagonal(std::span<const double>(s1.values())), s2.basis(),
                               Matrix::diagonal(std::span<const double>(s2.values())), r);
}

// Direct route: truncated SVD of the weighted concatenation
// [λ1·U1·Σ1 | λ2·U2·Σ2]. λ1 in (0, 1] forgets history, λ2 >= 1 boosts the
// newer subspace.
inline SubspaceEstimate basic_merge(const SubspaceEstimate& s1, const SubspaceEstimate& s2, std::size_t r,
                                    double lambda1, double lambda2) {
  detail::require_same_dim(s1, s2, "basic_merge");
  detail::require_merge_rank(r, s1.dim(), "basic_merge");
  detail::require_weights(lambda1, lambda2, "basic_merge");
  if (s1.is_empty() && s2.is_empty()) return SubspaceEstimate::empty(s1.dim());
  const Matrix x = detail::weighted_concat(s1, s2, lambda1, lambda2);
  return detail::estimate_from_svd(truncated_svd(x, std::min(r, std::min(x.rows(), x.cols()))));
}

// QR route: [Qp, Rp] = QR([λ1·U1·Σ1 | λ2·U2·Σ2]), then U = Qp · SVD_r(Rp).
inline SubspaceEstimate faster_merge(const SubspaceEstimate& s1, const SubspaceEstimate& s2, std::size_t r,
                                     double lambda1, double lambda2) {
  detail::require_same_dim(s1, s2, "faster_merge");
  detail::require_merge_rank(r, s1.dim(), "faster_merge");
  detail::require_weights(lambda1, lambda2, "faster_merge");
  if (s1.is_empty() && s2.is_empty()) return SubspaceEstimate::empty(s1.dim());
  const Matrix x = detail::weighted_concat(s1, s2, lambda1, lambda2);
  require_finite(x, "faster_merge");
  auto qr = detail::householder_qr(x);
  auto inner = truncated_svd(qr.r, std::min(r, std::min(qr.r.rows(), qr.r.cols())));
  Matrix basis = multiply(qr.q, inner.left);
  detail::apply_sign_convention<double>(basis, nullptr);
  return SubspaceEstimate(std::move(basis), std::move(inner.values));
}

}  // namespace fpca
