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

// Dense column-major matrix used by every kernel in the library.
//
// Storage goes through TrackingAllocator so that a MemoryProbe installed on
// the current thread sees every matrix buffer the algorithms create. With no
// probe installed the bookkeeping is a single thread_local pointer test.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "fpca/error.hpp"

namespace fpca {

// Allocation accounting for matrix buffers on the current thread.
struct AllocationStats {
  std::int64_t current_bytes = 0;
  std::int64_t peak_bytes = 0;
  std::size_t allocations = 0;
  std::set<std::pair<std::size_t, std::size_t>> shapes;  // (rows, cols)
};

class MemoryProbe;

namespace detail {
inline thread_local MemoryProbe* active_probe = nullptr;
}

// RAII: installs itself as the active probe for this thread. Probes nest;
// the innermost one receives the records.
class MemoryProbe {
 public:
  MemoryProbe() : previous_(detail::active_probe) { detail::active_probe = this; }
  ~MemoryProbe() { detail::active_probe = previous_; }
  MemoryProbe(const MemoryProbe&) = delete;
  MemoryProbe& operator=(const MemoryProbe&) = delete;

  const AllocationStats& stats() const noexcept { return stats_; }

  // True when some matrix with at least `rows` rows and `cols` columns was
  // created while the probe was active.
  bool saw_at_least(std::size_t rows, std::size_t cols) const {
    return std::any_of(stats_.shapes.begin(), stats_.shapes.end(),
                       [&](const auto& s) { return s.first >= rows && s.second >= cols; });
  }

  void on_allocate(std::size_t bytes) noexcept {
    stats_.current_bytes += static_cast<std::int64_t>(bytes);
    stats_.peak_bytes = std::max(stats_.peak_bytes, stats_.current_bytes);
    ++stats_.allocations;
  }
  void on_deallocate(std::size_t bytes) noexcept {
    stats_.current_bytes -= static_cast<std::int64_t>(bytes);
  }
  void on_shape(std::size_t rows, std::size_t cols) { stats_.shapes.emplace(rows, cols); }

 private:
  MemoryProbe* previous_;
  AllocationStats stats_;
};

template <typename T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    T* p = std::allocator<T>{}.allocate(n);
    if (auto* probe = detail::active_probe) probe->on_allocate(n * sizeof(T));
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    if (auto* probe = detail::active_probe) probe->on_deallocate(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }

  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept { return true; }
};

template <std::floating_point T>
class BasicMatrix {
 public:
  using value_type = T;
  using storage_type = std::vector<T, TrackingAllocator<T>>;

  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols) {
    if (auto* probe = detail::active_probe) probe->on_shape(rows, cols);
    data_.assign(rows * cols, fill);
  }

  BasicMatrix(const BasicMatrix& other) : rows_(other.rows_), cols_(other.cols_), data_(other.data_) {
    if (auto* probe = detail::active_probe) probe->on_shape(rows_, cols_);
  }
  BasicMatrix& operator=(const BasicMatrix& other) {
    if (this != &other) {
      if (auto* probe = detail::active_probe) probe->on_shape(other.rows_, other.cols_);
      rows_ = other.rows_;
      cols_ = other.cols_;
      data_ = other.data_;
    }
    return *this;
  }
  BasicMatrix(BasicMatrix&& other) noexcept
      : rows_(std::exchange(other.rows_, 0)), cols_(std::exchange(other.cols_, 0)),
        data_(std::move(other.data_)) {}
  BasicMatrix& operator=(BasicMatrix&& other) noexcept {
    rows_ = std::exchange(other.rows_, 0);
    cols_ = std::exchange(other.cols_, 0);
    data_ = std::move(other.data_);
    return *this;
  }

  static BasicMatrix identity(std::size_t n) {
    BasicMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  // Row-major nested initializer, convenient in tests: {{1, 2}, {3, 4}}.
  static BasicMatrix from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    BasicMatrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      detail::require(row.size() == c, "from_rows: ragged initializer");
      std::size_t j = 0;
      for (T v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  static BasicMatrix diagonal(std::span<const T> values) {
    BasicMatrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j) noexcept { return data_[j * rows_ + i]; }
  const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[j * rows_ + i]; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  std::span<T> col(std::size_t j) noexcept { return {data_.data() + j * rows_, rows_}; }
  std::span<const T> col(std::size_t j) const noexcept { return {data_.data() + j * rows_, rows_}; }

  // Copy of columns [begin, end).
  BasicMatrix cols_range(std::size_t begin, std::size_t end) const {
    detail::require(begin <= end && end <= cols_, "cols_range: out of bounds");
    BasicMatrix out(rows_, end - begin);
    std::copy(data_.begin() + static_cast<std::ptrdiff_t>(begin * rows_),
              data_.begin() + static_cast<std::ptrdiff_t>(end * rows_), out.data_.begin());
    return out;
  }

  // Copy of the leading block [0, r) x [0, c).
  BasicMatrix top_left(std::size_t r, std::size_t c) const {
    detail::require(r <= rows_ && c <= cols_, "top_left: out of bounds");
    BasicMatrix out(r, c);
    for (std::size_t j = 0; j < c; ++j)
      std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(j * rows_), r,
                  out.data_.begin() + static_cast<std::ptrdiff_t>(j * r));
    return out;
  }

  BasicMatrix transpose() const {
    BasicMatrix out(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = 0; i < rows_; ++i) out(j, i) = (*this)(i, j);
    return out;
  }

  T frobenius_norm() const {
    T s{0};
    for (T v : data_) s += v * v;
    return std::sqrt(s);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  BasicMatrix& operator*=(T s) {
    for (T& v : data_) v *= s;
    return *this;
  }
  BasicMatrix& operator+=(const BasicMatrix& o) {
    detail::require(rows_ == o.rows_ && cols_ == o.cols_, "operator+=: shape mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  BasicMatrix& operator-=(const BasicMatrix& o) {
    detail::require(rows_ == o.rows_ && cols_ == o.cols_, "operator-=: shape mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }

  friend BasicMatrix operator+(BasicMatrix a, const BasicMatrix& b) { return a += b; }
  friend BasicMatrix operator-(BasicMatrix a, const BasicMatrix& b) { return a -= b; }
  friend BasicMatrix operator*(BasicMatrix a, T s) { return a *= s; }

  friend bool operator==(const BasicMatrix& a, const BasicMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  storage_type data_;
};

using Matrix = BasicMatrix<double>;
using Vector = std::vector<double>;

template <std::floating_point T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s{0};
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <std::floating_point T>
T norm2(std::span<const T> a) {
  return std::sqrt(dot(a, a));
}

// Non-template forms accept mutable spans and vectors directly.
inline double dot(std::span<const double> a, std::span<const double> b) { return dot<double>(a, b); }
inline double norm2(std::span<const double> a) { return norm2<double>(a); }

// A * B
template <std::floating_point T>
BasicMatrix<T> multiply(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::require(a.cols() == b.rows(), "multiply: inner dimension mismatch");
  BasicMatrix<T> out(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    T* oc = out.col(j).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T bkj = b(k, j);
      if (bkj == T{0}) continue;
      const T* ac = a.col(k).data();
      for (std::size_t i = 0; i < a.rows(); ++i) oc[i] += ac[i] * bkj;
    }
  }
  return out;
}

// Aᵀ * B
template <std::floating_point T>
BasicMatrix<T> multiply_tn(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::require(a.rows() == b.rows(), "multiply_tn: row mismatch");
  BasicMatrix<T> out(a.cols(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t i = 0; i < a.cols(); ++i) out(i, j) = dot(a.col(i), b.col(j));
  return out;
}

// A * Bᵀ
template <std::floating_point T>
BasicMatrix<T> multiply_nt(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::require(a.cols() == b.cols(), "multiply_nt: column mismatch");
  BasicMatrix<T> out(a.rows(), b.rows());
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const T* ac = a.col(k).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const T bjk = b(j, k);
      if (bjk == T{0}) continue;
      T* oc = out.col(j).data();
      for (std::size_t i = 0; i < a.rows(); ++i) oc[i] += ac[i] * bjk;
    }
  }
  return out;
}

// [A | B]
template <std::floating_point T>
BasicMatrix<T> hcat(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::require(a.rows() == b.rows() || a.cols() == 0 || b.cols() == 0, "hcat: row mismatch");
  const std::size_t rows = a.cols() ? a.rows() : b.rows();
  BasicMatrix<T> out(rows, a.cols() + b.cols());
  std::copy_n(a.data(), a.size(), out.data());
  std::copy_n(b.data(), b.size(), out.data() + a.size());
  return out;
}

// A * diag(s)
template <std::floating_point T>
BasicMatrix<T> scale_columns(BasicMatrix<T> a, std::span<const T> s) {
  detail::require(a.cols() == s.size(), "scale_columns: length mismatch");
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (T& v : a.col(j)) v *= s[j];
  return a;
}

template <std::floating_point T>
void require_finite(const BasicMatrix<T>& m, const char* who) {
  if (!m.all_finite()) throw NonFiniteInput(std::string(who) + ": non-finite input");
}

}  // namespace fpca
