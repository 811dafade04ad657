#pragma once

// Reverse-mode differentiable tensor.
//
// A Tensor is a cheap handle onto a node of the computation graph. Values are
// immutable once an op has produced them; only gradient buffers (and leaf
// values, through the optimizer) change. Gradients of leaf tensors accumulate
// across backward() calls until zero_grad(); intermediate gradients are
// rebuilt on every pass.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace bysgnn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents' grads.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  // Uniform in [-bound, bound].
  static Tensor uniform(Shape shape, double bound, std::mt19937_64& rng, bool requires_grad = false);
  static Tensor eye(std::size_t n);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  bool requires_grad() const;

  std::span<const double> data() const;
  // Writable view of a leaf's values. Throws for op outputs, whose values are
  // part of a recorded graph.
  std::span<double> mutable_data();
  // Empty span if no gradient has been accumulated yet.
  std::span<const double> grad() const;
  void zero_grad();

  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  // Populates gradients of every reachable tensor that requires grad.
  // Precondition: this tensor holds exactly one element.
  void backward() const;

  // Leaf copy of the current values, detached from the graph.
  Tensor detach() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Builds an op output node. `parents` that do not require grad are dropped
// from the tape; if none require grad the output is a constant.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward);

// While alive on a thread, op outputs record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Keeps large freed buffers in the heap instead of returning them to the OS.
// Graph-sized temporaries are reallocated every batch. No-op off glibc.
void retain_freed_memory();

// Number of worker threads ops may use for batch-parallel kernels. Default 1.
void set_num_threads(unsigned n);
unsigned num_threads();

struct Parameter {
  std::string name;
  Tensor tensor;
};

// Ordered, name-unique collection of learnable tensors.
class ParameterStore {
 public:
  Tensor add(const std::string& name, Tensor tensor);
  // Weight matrix initialized uniform in ±sqrt(1/fan_in).
  Tensor add_weight(const std::string& name, Shape shape, std::size_t fan_in, std::mt19937_64& rng);
  Tensor add_zeros(const std::string& name, Shape shape);
  Tensor add_constant(const std::string& name, Shape shape, double value);

  bool contains(const std::string& name) const;
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  std::vector<Parameter>& items() { return items_; }
  const std::vector<Parameter>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t total_elements() const;
  void zero_grad();

 private:
  std::vector<Parameter> items_;
};

}  // namespace bysgnn
