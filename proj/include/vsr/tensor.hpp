#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "vsr/error.hpp"

namespace vsr {

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& shape);
std::int64_t numel_of(const Shape& shape);
const char* dtype_name(DType dtype);

template <typename T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? DType::F32 : DType::F64;
}

// Calls fn.template operator()<T>() with T matching the runtime dtype.
template <typename Fn>
decltype(auto) dispatch(DType dtype, Fn&& fn) {
  if (dtype == DType::F32) return fn.template operator()<float>();
  return fn.template operator()<double>();
}

using Storage = std::variant<std::vector<float>, std::vector<double>>;

class Tensor;

// Backward rule of one recorded op. Receives the gradient flowing into the op's output.
using BackwardFn = std::function<void(const Tensor& grad_out)>;

struct Node {
  const char* op = "";
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  DType dtype = DType::F32;
  Storage data;
  Storage grad;
  bool has_grad = false;
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;
};

// Shared handle to a dense row-major array. Copies of a Tensor alias the same storage
// and autograd node; use clone() for an independent value.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dtype = DType::F32);
  static Tensor full(Shape shape, double value, DType dtype = DType::F32);
  static Tensor from_data(Shape shape, std::vector<float> values);
  static Tensor from_data(Shape shape, std::vector<double> values);
  // Converts values to the requested dtype.
  static Tensor from_values(Shape shape, std::span<const double> values, DType dtype);
  static Tensor scalar(double value, DType dtype = DType::F32);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const { return impl().shape; }
  std::int64_t dim(int axis) const;
  int ndim() const { return static_cast<int>(impl().shape.size()); }
  std::int64_t numel() const { return numel_of(impl().shape); }
  DType dtype() const { return impl().dtype; }

  template <typename T>
  std::span<T> data() {
    return std::get<std::vector<T>>(checked_impl<T>().data);
  }
  template <typename T>
  std::span<const T> data() const {
    return std::get<std::vector<T>>(checked_impl<T>().data);
  }

  double item() const;
  double value_at(std::int64_t flat_index) const;
  std::vector<double> to_vector() const;

  bool requires_grad() const { return impl().requires_grad; }
  // Only leaves may be flagged; op outputs inherit the flag from their inputs.
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const { return impl().grad_fn == nullptr; }
  const std::shared_ptr<Node>& grad_fn() const { return impl().grad_fn; }

  bool has_grad() const { return impl().has_grad; }
  // Copy of the accumulated gradient as a plain tensor.
  Tensor grad() const;
  void zero_grad();
  // Gradient accumulator, allocated as zeros on first access.
  template <typename T>
  std::span<T> mutable_grad() {
    auto& im = checked_impl<T>();
    if (!im.has_grad) {
      im.grad = std::vector<T>(static_cast<std::size_t>(numel_of(im.shape)), T(0));
      im.has_grad = true;
    }
    return std::get<std::vector<T>>(im.grad);
  }

  // Value copy without graph history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }
  Tensor to(DType dtype) const;

  // Reverse-mode sweep from a one-element tensor. Leaf gradients accumulate; the
  // recorded graph is released afterwards.
  void backward() const;

  // Bitwise equality of shape, dtype and payload.
  bool same_bits(const Tensor& other) const;

  TensorImpl& impl() const;
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

 private:
  template <typename T>
  TensorImpl& checked_impl() const {
    auto& im = impl();
    if (im.dtype != dtype_of<T>()) {
      throw Error(std::string("dtype mismatch: tensor is ") + dtype_name(im.dtype));
    }
    return im;
  }

  std::shared_ptr<TensorImpl> impl_;
};

// Thread-local switch for graph recording.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// True when an op consuming `inputs` must record a node.
bool needs_grad(std::initializer_list<const Tensor*> inputs);
bool needs_grad(std::span<const Tensor> inputs);

// Records `fn` as the backward rule of `out` if grad recording is active and some
// input participates in differentiation.
void record(Tensor& out, const char* op, std::vector<Tensor> inputs, BackwardFn fn);

// Whether gradient should be routed into this input during backward.
inline bool wants_grad(const Tensor& t) { return t.defined() && t.requires_grad(); }

}  // namespace vsr
