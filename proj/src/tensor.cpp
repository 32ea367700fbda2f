#include "vsr/tensor.hpp"

#include <cstring>
#include <sstream>
#include <unordered_set>

namespace vsr {

namespace {
thread_local bool g_grad_enabled = true;

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
  for (auto e : shape) {
    if (e < 1) throw ShapeError("tensor extents must be >= 1, got " + shape_str(shape));
  }
}
}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::int64_t numel_of(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

const char* dtype_name(DType dtype) { return dtype == DType::F32 ? "f32" : "f64"; }

Tensor Tensor::zeros(Shape shape, DType dtype) { return full(std::move(shape), 0.0, dtype); }

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  check_shape(shape);
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  auto n = static_cast<std::size_t>(numel_of(shape));
  t.impl_->shape = std::move(shape);
  t.impl_->dtype = dtype;
  if (dtype == DType::F32) {
    t.impl_->data = std::vector<float>(n, static_cast<float>(value));
  } else {
    t.impl_->data = std::vector<double>(n, value);
  }
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<float> values) {
  check_shape(shape);
  if (numel_of(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("payload of " + std::to_string(values.size()) + " values does not fill " +
                     shape_str(shape));
  }
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  t.impl_->shape = std::move(shape);
  t.impl_->dtype = DType::F32;
  t.impl_->data = std::move(values);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values) {
  check_shape(shape);
  if (numel_of(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("payload of " + std::to_string(values.size()) + " values does not fill " +
                     shape_str(shape));
  }
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  t.impl_->shape = std::move(shape);
  t.impl_->dtype = DType::F64;
  t.impl_->data = std::move(values);
  return t;
}

Tensor Tensor::from_values(Shape shape, std::span<const double> values, DType dtype) {
  if (dtype == DType::F64) return from_data(std::move(shape), std::vector<double>(values.begin(), values.end()));
  std::vector<float> v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) v[i] = static_cast<float>(values[i]);
  return from_data(std::move(shape), std::move(v));
}

Tensor Tensor::scalar(double value, DType dtype) { return full({1}, value, dtype); }

TensorImpl& Tensor::impl() const {
  if (!impl_) throw Error("use of undefined tensor");
  return *impl_;
}

std::int64_t Tensor::dim(int axis) const {
  const auto& s = shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return value_at(0);
}

double Tensor::value_at(std::int64_t i) const {
  return dispatch(dtype(), [&]<typename T>() { return static_cast<double>(data<T>()[static_cast<std::size_t>(i)]); });
}

std::vector<double> Tensor::to_vector() const {
  return dispatch(dtype(), [&]<typename T>() {
    auto d = data<T>();
    return std::vector<double>(d.begin(), d.end());
  });
}

Tensor& Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw AutogradError("requires_grad can only be set on leaf tensors");
  impl().requires_grad = flag;
  return *this;
}

Tensor Tensor::grad() const {
  const auto& im = impl();
  if (!im.has_grad) throw AutogradError("tensor has no gradient");
  Tensor g;
  g.impl_ = std::make_shared<TensorImpl>();
  g.impl_->shape = im.shape;
  g.impl_->dtype = im.dtype;
  g.impl_->data = im.grad;
  return g;
}

void Tensor::zero_grad() {
  auto& im = impl();
  im.has_grad = false;
  im.grad = Storage{};
}

Tensor Tensor::detach() const {
  const auto& im = impl();
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  t.impl_->shape = im.shape;
  t.impl_->dtype = im.dtype;
  t.impl_->data = im.data;
  return t;
}

Tensor Tensor::to(DType target) const {
  if (target == dtype()) return detach();
  auto values = to_vector();
  return from_values(shape(), values, target);
}

bool Tensor::same_bits(const Tensor& other) const {
  if (shape() != other.shape() || dtype() != other.dtype()) return false;
  return dispatch(dtype(), [&]<typename T>() {
    auto a = data<T>();
    auto b = other.data<T>();
    return std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
  });
}

void Tensor::backward() const {
  auto& root = impl();
  if (numel() != 1) {
    throw AutogradError("backward requires a one-element root, got " + shape_str(root.shape));
  }
  if (!root.requires_grad) throw AutogradError("backward on a tensor that is not part of a graph");

  // Iterative post-order DFS; reversed it is a valid reverse topological order.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  // Releasing a node below may drop the last reference to one of its inputs.
  std::vector<std::shared_ptr<TensorImpl>> keep_alive;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(&root, 0);
  visited.insert(&root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto& fn = node->grad_fn;
    if (fn && next < fn->inputs.size()) {
      const auto& child = fn->inputs[next++].impl_ptr();
      if (child->requires_grad && visited.insert(child.get()).second) {
        keep_alive.push_back(child);
        stack.emplace_back(child.get(), 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  Tensor root_handle;
  root_handle.impl_ = std::shared_ptr<TensorImpl>(std::shared_ptr<TensorImpl>{}, &root);
  dispatch(root.dtype, [&]<typename T>() { root_handle.mutable_grad<T>()[0] = T(1); });

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (!node->grad_fn) continue;
    if (node->has_grad) {
      Tensor grad_out;
      grad_out.impl_ = std::make_shared<TensorImpl>();
      grad_out.impl_->shape = node->shape;
      grad_out.impl_->dtype = node->dtype;
      grad_out.impl_->data = std::move(node->grad);
      node->grad_fn->backward(grad_out);
    }
    node->grad = Storage{};
    node->has_grad = false;
  }
  // Release the graph only after every rule ran; rules hold the inputs they need.
  for (auto* node : order) {
    if (node->grad_fn) {
      node->grad_fn.reset();
      node->requires_grad = false;
    }
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  for (const auto* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

bool needs_grad(std::span<const Tensor> inputs) {
  if (!g_grad_enabled) return false;
  for (const auto& t : inputs) {
    if (t.defined() && t.requires_grad()) return true;
  }
  return false;
}

void record(Tensor& out, const char* op, std::vector<Tensor> inputs, BackwardFn fn) {
  if (!needs_grad(std::span<const Tensor>(inputs))) return;
  auto node = std::make_shared<Node>();
  node->op = op;
  node->inputs = std::move(inputs);
  node->backward = std::move(fn);
  out.impl().grad_fn = std::move(node);
  out.impl().requires_grad = true;
}

}  // namespace vsr
