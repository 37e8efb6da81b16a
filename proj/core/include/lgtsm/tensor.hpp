// Copyright 2026 The LGTSM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "lgtsm/errors.hpp"

namespace lgtsm {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

const char* dtype_name(DType dt);

// Extents in canonical B,C,L,H,W order. An empty shape is a scalar.
using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? DType::f32 : DType::f64;
}

// Calls f(float{}) or f(double{}) depending on dt.
template <typename F>
decltype(auto) dispatch(DType dt, F&& f) {
  if (dt == DType::f32) return f(float{});
  return f(double{});
}

class Tape;

namespace detail {

// Tensor buffers start on a cache-line boundary. Vectorized reductions peel
// a scalar head that depends on the start address, so a fixed alignment
// keeps results bit-identical between otherwise equal tensors.
template <typename T>
struct CacheAlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  CacheAlignedAllocator() = default;
  template <typename U>
  CacheAlignedAllocator(const CacheAlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const CacheAlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using Buffer = std::vector<T, CacheAlignedAllocator<T>>;

struct TensorImpl {
  Shape shape;
  DType dtype = DType::f32;
  std::variant<Buffer<float>, Buffer<double>> storage;
  bool requires_grad = false;
  std::shared_ptr<TensorImpl> grad;
  // Set when the tensor is the output of an op recorded on a tape.
  std::uint64_t tape_id = 0;
  std::size_t node_index = 0;
};

}  // namespace detail

// Reference-semantics handle to a dense row-major array. Copies of a Tensor
// share storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dtype = DType::f64);
  static Tensor full(Shape shape, double value, DType dtype = DType::f64);
  static Tensor from_values(Shape shape, std::span<const double> values,
                            DType dtype = DType::f64);
  static Tensor from_values(Shape shape, std::initializer_list<double> values,
                            DType dtype = DType::f64);
  static Tensor scalar(double value, DType dtype = DType::f64);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t dim(int axis) const;
  int rank() const { return static_cast<int>(shape().size()); }
  std::int64_t numel() const { return shape_numel(shape()); }
  DType dtype() const;

  template <typename T>
  std::span<T> data() {
    check_dtype(dtype_of<T>());
    auto& v = std::get<detail::Buffer<T>>(impl_->storage);
    return {v.data(), v.size()};
  }
  template <typename T>
  std::span<const T> data() const {
    check_dtype(dtype_of<T>());
    const auto& v = std::get<detail::Buffer<T>>(impl_->storage);
    return {v.data(), v.size()};
  }

  // Element access through double, whatever the storage type.
  double at(std::int64_t flat_index) const;
  void set(std::int64_t flat_index, double value);
  double item() const;
  std::vector<double> to_vector() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  // Accumulated gradient; undefined until a backward pass reaches it.
  Tensor grad() const;
  void zero_grad();

  Tensor clone() const;
  Tensor to(DType dtype) const;
  // Copy with a different shape of equal element count.
  Tensor reshaped(Shape shape) const;

  bool same_as(const Tensor& other) const { return impl_ == other.impl_; }
  detail::TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }

  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}

 private:
  void check_dtype(DType expected) const;

  std::shared_ptr<detail::TensorImpl> impl_;
};

// Verification mode: every op output is scanned for NaN/Inf and a
// NumericError is raised naming the op. Thread-local, off by default.
bool verification_mode();
void set_verification_mode(bool on);

class VerificationScope {
 public:
  explicit VerificationScope(bool on = true) : previous_(verification_mode()) {
    set_verification_mode(on);
  }
  ~VerificationScope() { set_verification_mode(previous_); }
  VerificationScope(const VerificationScope&) = delete;
  VerificationScope& operator=(const VerificationScope&) = delete;

 private:
  bool previous_;
};

void check_finite(const Tensor& t, const char* op);

// Throws ShapeError with a message naming the op when shapes differ.
void check_same_shape(const Tensor& a, const Tensor& b, const char* op);
void check_same_dtype(const Tensor& a, const Tensor& b, const char* op);

}  // namespace lgtsm
