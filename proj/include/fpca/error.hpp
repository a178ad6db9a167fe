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

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace fpca {

// Base of every error thrown by the library. Errors raised inside a
// federation leaf carry the id of the node that produced them.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}

  const std::optional<std::size_t>& node() const noexcept { return node_; }
  void set_node(std::size_t id) noexcept { node_ = id; }

 private:
  std::optional<std::size_t> node_;
};

// Bad shapes, ranks or parameters.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// NaN or Inf reached a kernel.
class NonFiniteInput : public Error {
 public:
  using Error::Error;
};

// The noise calibration formula is undefined for the requested parameters.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

// A DP batch is narrower than the minimum batch size for the noise floor.
class PrivacyInfeasible : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable input data.
class DataError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace detail
}  // namespace fpca
