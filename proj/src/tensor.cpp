#include "topicflow/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace topicflow {

namespace {
thread_local bool g_grad_enabled = true;

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("tensor: negative extent in shape " + shape_to_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}
}  // namespace

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  Tensor t;
  std::size_t n = shape_numel(shape);
  t.shape = std::move(shape);
  t.data = std::make_shared<std::vector<double>>(n, 0.0);
  t.requires_grad = requires_grad;
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double v, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.data->begin(), t.data->end(), v);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  if (n != values.size()) {
    throw ShapeError("tensor: shape " + shape_to_string(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::make_shared<std::vector<double>>(std::move(values));
  t.requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({}, {v}, requires_grad);
}

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  int n = static_cast<int>(values.size());
  return from({1, n}, std::move(values), requires_grad);
}

std::size_t Tensor::numel() const {
  return data ? data->size() : 0;
}

int Tensor::rows() const {
  if (shape.size() != 2) throw ShapeError("rows(): tensor is not 2-D, shape " + shape_str());
  return shape[0];
}

int Tensor::cols() const {
  if (shape.size() != 2) throw ShapeError("cols(): tensor is not 2-D, shape " + shape_str());
  return shape[1];
}

double Tensor::value() const {
  if (numel() != 1) throw ShapeError("value(): tensor is not scalar, shape " + shape_str());
  return (*data)[0];
}

double Tensor::at(int r, int c) const {
  return (*data)[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(c)];
}

void Tensor::set(int r, int c, double v) {
  (*data)[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(c)] = v;
}

void Tensor::ensure_grad() {
  if (!grad) grad = std::make_shared<std::vector<double>>(numel(), 0.0);
}

void Tensor::zero_grad() {
  if (grad) {
    std::fill(grad->begin(), grad->end(), 0.0);
  } else {
    grad = std::make_shared<std::vector<double>>(numel(), 0.0);
  }
}

std::string Tensor::shape_str() const {
  return shape_to_string(shape);
}

Parameter::Parameter(std::string name_, Tensor value_) : name(std::move(name_)), value(std::move(value_)) {
  value.requires_grad = true;
  value.ensure_grad();
}

bool grad_enabled() {
  return g_grad_enabled;
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() {
  g_grad_enabled = prev_;
}

namespace {

// Iterative post-order DFS over graph nodes; throws on a back edge.
std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_map<Node*, int> state;  // 0 unseen, 1 in stack, 2 done
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  state[root] = 1;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next].node.get();
      ++next;
      if (!p) continue;
      int& s = state[p];
      if (s == 1) throw NumericError("backward: cyclic graph");
      if (s == 0) {
        s = 1;
        stack.emplace_back(p, 0);
      }
    } else {
      state[node] = 2;
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children
}

}  // namespace

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + loss.shape_str());
  }
  if (!loss.requires_grad) return;
  // Graph outputs carry an eagerly allocated grad buffer shared with the
  // recorded node's closure; a bare leaf used as the loss must have had its
  // buffer allocated by the caller (Parameter does this on construction).
  if (loss.grad) (*loss.grad)[0] += 1.0;
  if (!loss.node) return;
  std::vector<Node*> order = topo_order(loss.node.get());
  // Reverse creation order. Any reverse topological order is correct; this
  // one keeps gradient accumulation independent of how a shared subgraph is
  // consumed downstream, so adding a zero-weight branch (e.g. a disabled
  // gate) cannot perturb other gradients at the last bit.
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->seq > b->seq; });
  for (Node* node : order) {
    if (node->backward) node->backward();
  }
}

std::vector<std::vector<double>> gradient_of(const Tensor& loss, const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
  backward(loss);
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (Parameter* p : params) out.push_back(*p->value.grad);
  return out;
}

}  // namespace topicflow
