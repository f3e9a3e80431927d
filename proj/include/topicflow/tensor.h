#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace topicflow {

// Thrown when operand shapes do not conform; message names the primitive
// and both shapes.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when an op produces NaN/Inf from finite inputs, or when a numeric
// precondition (degenerate Jacobian, log of non-positive value) is violated.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct Node;

// Dense row-major tensor of 64-bit floats with reverse-mode autodiff.
// Copies are shallow: they share storage, gradient, and graph node.
// Scalars use the empty shape {} (numel == 1).
struct Tensor {
  std::vector<int> shape;
  std::shared_ptr<std::vector<double>> data;
  std::shared_ptr<std::vector<double>> grad;  // allocated eagerly for graph outputs, lazily for leaves
  std::shared_ptr<Node> node;                 // null for leaves and constants
  bool requires_grad = false;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double v, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor row(std::vector<double> values, bool requires_grad = false);  // shape {1, n}

  bool defined() const { return static_cast<bool>(data); }
  std::size_t numel() const;
  int rank() const { return static_cast<int>(shape.size()); }
  // 2-D accessors; throw on other ranks.
  int rows() const;
  int cols() const;

  double value() const;  // scalar read; throws if numel != 1
  double at(int r, int c) const;
  void set(int r, int c, double v);

  void ensure_grad();  // allocate zeroed gradient buffer if absent
  void zero_grad();

  std::string shape_str() const;
};

// One recorded op in the computation graph. `backward` reads the output
// gradient (captured by the op) and accumulates into the parents' gradients.
struct Node {
  const char* op = "";
  unsigned long long seq = 0;  // creation order; backward replays it in reverse
  std::vector<Tensor> parents;
  std::function<void()> backward;
};

// A named trainable leaf. Gradients accumulate on value.grad; callers zero
// it (zero_grad) before each backward pass.
struct Parameter {
  std::string name;
  Tensor value;

  Parameter() = default;
  Parameter(std::string name_, Tensor value_);

  void zero_grad() { value.zero_grad(); }
  std::size_t numel() const { return value.numel(); }
};

// Thread-local autograd switch. Ops record graph nodes only while enabled.
bool grad_enabled();

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();

 private:
  bool prev_;
};

// Reverse-mode backward from a scalar loss. Accumulates into the grad
// buffers of every requires_grad tensor on a path to the loss; leaves not
// on any path are untouched (so a prior zero_grad leaves them at zero).
// Throws ShapeError on a non-scalar loss and NumericError on a cyclic graph.
void backward(const Tensor& loss);

// Convenience for the gradient_of contract: zero the given parameters'
// grads, run backward, and return one gradient vector per parameter.
std::vector<std::vector<double>> gradient_of(const Tensor& loss, const std::vector<Parameter*>& params);

std::string shape_to_string(const std::vector<int>& shape);

}  // namespace topicflow
