#include "bysgnn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "bysgnn/error.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace bysgnn {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

std::shared_ptr<detail::Node> new_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) +
                         " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

const detail::Node& checked(const std::shared_ptr<detail::Node>& n) {
  if (!n) throw ContractError("use of an undefined tensor");
  return *n;
}

std::atomic<unsigned> g_threads{1};

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(new_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(new_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(new_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

Tensor Tensor::uniform(Shape shape, double bound, std::mt19937_64& rng, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  std::vector<double> v(n);
  // Explicit mapping from raw 64-bit draws keeps initialization identical
  // across standard library implementations.
  for (auto& x : v) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x = (2.0 * u - 1.0) * bound;
  }
  return Tensor(new_leaf(std::move(shape), std::move(v), requires_grad));
}

Tensor Tensor::eye(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return from({n, n}, std::move(v));
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).value.size(); }
bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

std::span<const double> Tensor::data() const { return checked(node_).value; }

std::span<double> Tensor::mutable_data() {
  checked(node_);
  if (node_->backward) throw ContractError("mutable_data() on a non-leaf tensor");
  return node_->value;
}

std::span<const double> Tensor::grad() const { return checked(node_).grad; }

void Tensor::zero_grad() {
  checked(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  const auto& n = checked(node_);
  if (n.value.size() != 1) throw ContractError("item() on tensor of shape " + shape_str(n.shape));
  return n.value[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& n = checked(node_);
  if (index.size() != n.shape.size()) throw DimensionError("index rank mismatch for " + shape_str(n.shape));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= n.shape[axis]) throw DimensionError("index out of range for " + shape_str(n.shape));
    flat = flat * n.shape[axis] + i;
    ++axis;
  }
  return n.value[flat];
}

void Tensor::backward() const {
  const auto& root = checked(node_);
  if (root.value.size() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape_str(root.shape));
  }
  if (!root.requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Intermediate grads are allocated on first accumulation and released
  // once propagated; leaves keep accumulating.
  for (detail::Node* n : order) {
    if (n->backward) std::vector<double>().swap(n->grad);
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->backward || n->grad.empty()) continue;
    n->backward(*n);
    if (n != node_.get()) std::vector<double>().swap(n->grad);
  }
}

Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  return from(n.shape, n.value, false);
}

namespace {
thread_local bool t_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

void retain_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward) {
#ifndef NDEBUG
  for (double v : value) {
    if (!std::isfinite(v)) throw NumericalError("non-finite value produced by tensor op, shape " + shape_str(shape));
  }
#endif
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (t_grad_enabled) {
    for (auto& p : parents) {
      if (p.defined() && p.requires_grad()) node->parents.push_back(p.node());
    }
  }
  if (!node->parents.empty()) {
    node->requires_grad = true;
    // Ops capture their operands by handle; keep every operand alive through
    // the closure rather than the (possibly pruned) parent list.
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void set_num_threads(unsigned n) { g_threads.store(std::max(1u, n)); }
unsigned num_threads() { return g_threads.load(); }

Tensor ParameterStore::add(const std::string& name, Tensor tensor) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  if (!tensor.requires_grad()) tensor = Tensor::from(tensor.shape(), std::vector<double>(tensor.data().begin(), tensor.data().end()), true);
  items_.push_back({name, tensor});
  return tensor;
}

Tensor ParameterStore::add_weight(const std::string& name, Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  return add(name, Tensor::uniform(std::move(shape), bound, rng, true));
}

Tensor ParameterStore::add_zeros(const std::string& name, Shape shape) {
  return add(name, Tensor::zeros(std::move(shape), true));
}

Tensor ParameterStore::add_constant(const std::string& name, Shape shape, double value) {
  return add(name, Tensor::full(std::move(shape), value, true));
}

bool ParameterStore::contains(const std::string& name) const {
  return std::any_of(items_.begin(), items_.end(), [&](const Parameter& p) { return p.name == name; });
}

Tensor& ParameterStore::get(const std::string& name) {
  for (auto& p : items_) {
    if (p.name == name) return p.tensor;
  }
  throw ConfigError("unknown parameter: " + name);
}

const Tensor& ParameterStore::get(const std::string& name) const {
  for (const auto& p : items_) {
    if (p.name == name) return p.tensor;
  }
  throw ConfigError("unknown parameter: " + name);
}

std::size_t ParameterStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.tensor.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : items_) p.tensor.zero_grad();
}

}  // namespace bysgnn
