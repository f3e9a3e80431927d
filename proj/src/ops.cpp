#include "topicflow/ops.h"

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

namespace topicflow {
namespace ops {

namespace {

bool tracked(const Tensor& t) { return grad_enabled() && t.requires_grad; }

Tensor make_out(std::vector<int> shape, bool req) {
  Tensor out = Tensor::zeros(std::move(shape), req);
  if (req) out.ensure_grad();
  return out;
}

void check_finite(const Tensor& t, const char* op) {
  for (double v : *t.data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite output");
    }
  }
}

void attach(Tensor& out, const char* op, std::vector<Tensor> parents,
            std::function<void()> fn) {
  if (!out.requires_grad) return;
  for (const Tensor& p : parents) {
    if (p.requires_grad && !p.grad) {
      throw NumericError(std::string(op) +
                         ": differentiable input has no gradient buffer; "
                         "construct it as a Parameter or call ensure_grad()");
    }
  }
  thread_local unsigned long long next_seq = 0;
  out.node = std::make_shared<Node>();
  out.node->op = op;
  out.node->seq = ++next_seq;
  out.node->parents = std::move(parents);
  out.node->backward = std::move(fn);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
  }
}

void require_2d(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected 2-D tensor, got " + t.shape_str());
  }
}

int last_dim(const Tensor& t, const char* op) {
  if (t.rank() == 0) {
    throw ShapeError(std::string(op) + ": expected rank >= 1, got scalar");
  }
  return t.shape.back();
}

// Row-vector check for broadcasts: {C} or {1,C}.
int row_width(const Tensor& v, const char* op) {
  if (v.rank() == 1) return v.shape[0];
  if (v.rank() == 2 && v.shape[0] == 1) return v.shape[1];
  throw ShapeError(std::string(op) + ": expected row vector, got " + v.shape_str());
}

double scalar_value(const Tensor& s, const char* op) {
  if (s.numel() != 1) {
    throw ShapeError(std::string(op) + ": expected scalar tensor, got " + s.shape_str());
  }
  return (*s.data)[0];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = make_out(a.shape, tracked(a) || tracked(b));
  const auto& xa = *a.data;
  const auto& xb = *b.data;
  auto& y = *out.data;
  for (size_t i = 0; i < y.size(); ++i) y[i] = xa[i] + xb[i];
  check_finite(out, "add");
  attach(out, "add", {a, b}, [a, b, og = out.grad]() {
    const auto& g = *og;
    if (a.requires_grad) {
      auto& ga = *a.grad;
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad) {
      auto& gb = *b.grad;
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = make_out(a.shape, tracked(a) || tracked(b));
  const auto& xa = *a.data;
  const auto& xb = *b.data;
  auto& y = *out.data;
  for (size_t i = 0; i < y.size(); ++i) y[i] = xa[i] - xb[i];
  check_finite(out, "sub");
  attach(out, "sub", {a, b}, [a, b, og = out.grad]() {
    const auto& g = *og;
    if (a.requires_grad) {
      auto& ga = *a.grad;
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad) {
      auto& gb = *b.grad;
      for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = make_out(a.shape, tracked(a) || tracked(b));
  const auto& xa = *a.data;
  const auto& xb = *b.data;
  auto& y = *out.data;
  for (size_t i = 0; i < y.size(); ++i) y[i] = xa[i] * xb[i];
  check_finite(out, "mul");
  attach(out, "mul", {a, b}, [a, b, og = out.grad]() {
    const auto& g = *og;
    const auto& xa = *a.data;
    const auto& xb = *b.data;
    if (a.requires_grad) {
      auto& ga = *a.grad;
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * xb[i];
    }
    if (b.requires_grad) {
      auto& gb = *b.grad;
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xa[i];
    }
  });
  return out;
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor add_scalar(const Tensor& a, double s) {
  Tensor out = make_out(a.shape, tracked(a));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (size_t i = 0; i < y.size(); ++i) y[i] = x[i] + s;
  check_finite(out, "add_scalar");
  attach(out, "add_scalar", {a}, [a, og = out.grad]() {
    if (!a.requires_grad) return;
    const auto& g = *og;
    auto& ga = *a.grad;
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
  return out;
}

Tensor mul_scalar(const Tensor& a, double s) {
  Tensor out = make_out(a.shape, tracked(a));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (size_t i = 0; i < y.size(); ++i) y[i] = x[i] * s;
  check_finite(out, "mul_scalar");
  attach(out, "mul_scalar", {a}, [a, s, og = out.grad]() {
    if (!a.requires_grad) return;
    const auto& g = *og;
    auto& ga = *a.grad;
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  if (a.shape[1] != b.shape[0]) {
    throw ShapeError("matmul: inner dimension mismatch " + a.shape_str() + " x " +
                     b.shape_str());
  }
  const int M = a.shape[0], K = a.shape[1], N = b.shape[1];
  Tensor out = make_out({M, N}, tracked(a) || tracked(b));
  {
    const double* pa = a.data->data();
    const double* pb = b.data->data();
    double* py = out.data->data();
    for (int i = 0; i < M; ++i) {
      for (int k = 0; k < K; ++k) {
        const double av = pa[i * K + k];
        if (av == 0.0) continue;
        const double* brow = pb + k * N;
        double* yrow = py + i * N;
        for (int j = 0; j < N; ++j) yrow[j] += av * brow[j];
      }
    }
  }
  check_finite(out, "matmul");
  attach(out, "matmul", {a, b}, [a, b, M, K, N, og = out.grad]() {
    const double* g = og->data();
    if (a.requires_grad) {
      // dA = G B^T
      const double* pb = b.data->data();
      double* ga = a.grad->data();
      for (int i = 0; i < M; ++i) {
        for (int k = 0; k < K; ++k) {
          double acc = 0.0;
          const double* grow = g + i * N;
          const double* brow = pb + k * N;
          for (int j = 0; j < N; ++j) acc += grow[j] * brow[j];
          ga[i * K + k] += acc;
        }
      }
    }
    if (b.requires_grad) {
      // dB = A^T G
      const double* pa = a.data->data();
      double* gb = b.grad->data();
      for (int i = 0; i < M; ++i) {
        const double* grow = g + i * N;
        for (int k = 0; k < K; ++k) {
          const double av = pa[i * K + k];
          if (av == 0.0) continue;
          double* gbrow = gb + k * N;
          for (int j = 0; j < N; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
  return out;
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const int R = a.shape[0], C = a.shape[1];
  Tensor out = make_out({C, R}, tracked(a));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j) y[j * R + i] = x[i * C + j];
  attach(out, "transpose", {a}, [a, R, C, og = out.grad]() {
    if (!a.requires_grad) return;
    const auto& g = *og;
    auto& ga = *a.grad;
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j) ga[i * C + j] += g[j * R + i];
  });
  return out;
}

Tensor add_rows(const Tensor& m, const Tensor& v) {
  require_2d(m, "add_rows");
  const int C = row_width(v, "add_rows");
  if (m.shape[1] != C) {
    throw ShapeError("add_rows: width mismatch " + m.shape_str() + " vs " + v.shape_str());
  }
  const int R = m.shape[0];
  Tensor out = make_out(m.shape, tracked(m) || tracked(v));
  const auto& x = *m.data;
  const auto& b = *v.data;
  auto& y = *out.data;
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j) y[i * C + j] = x[i * C + j] + b[j];
  check_finite(out, "add_rows");
  attach(out, "add_rows", {m, v}, [m, v, R, C, og = out.grad]() {
    const auto& g = *og;
    if (m.requires_grad) {
      auto& gm = *m.grad;
      for (size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
    }
    if (v.requires_grad) {
      auto& gv = *v.grad;
      for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) gv[j] += g[i * C + j];
    }
  });
  return out;
}

Tensor mul_rows(const Tensor& m, const Tensor& v) {
  require_2d(m, "mul_rows");
  const int C = row_width(v, "mul_rows");
  if (m.shape[1] != C) {
    throw ShapeError("mul_rows: width mismatch " + m.shape_str() + " vs " + v.shape_str());
  }
  const int R = m.shape[0];
  Tensor out = make_out(m.shape, tracked(m) || tracked(v));
  const auto& x = *m.data;
  const auto& b = *v.data;
  auto& y = *out.data;
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j) y[i * C + j] = x[i * C + j] * b[j];
  check_finite(out, "mul_rows");
  attach(out, "mul_rows", {m, v}, [m, v, R, C, og = out.grad]() {
    const auto& g = *og;
    const auto& x = *m.data;
    const auto& b = *v.data;
    if (m.requires_grad) {
      auto& gm = *m.grad;
      for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) gm[i * C + j] += g[i * C + j] * b[j];
    }
    if (v.requires_grad) {
      auto& gv = *v.grad;
      for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) gv[j] += g[i * C + j] * x[i * C + j];
    }
  });
  return out;
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  const double sv = scalar_value(s, "scale_by");
  Tensor out = make_out(a.shape, tracked(a) || tracked(s));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (size_t i = 0; i < y.size(); ++i) y[i] = x[i] * sv;
  check_finite(out, "scale_by");
  attach(out, "scale_by", {a, s}, [a, s, og = out.grad]() {
    const auto& g = *og;
    const auto& x = *a.data;
    const double sv = (*s.data)[0];
    if (a.requires_grad) {
      auto& ga = *a.grad;
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sv;
    }
    if (s.requires_grad) {
      double acc = 0.0;
      for (size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
      (*s.grad)[0] += acc;
    }
  });
  return out;
}

Tensor div_by(const Tensor& a, const Tensor& s) {
  const double sv = scalar_value(s, "div_by");
  if (sv == 0.0) throw NumericError("div_by: division by zero");
  Tensor out = make_out(a.shape, tracked(a) || tracked(s));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (size_t i = 0; i < y.size(); ++i) y[i] = x[i] / sv;
  check_finite(out, "div_by");
  attach(out, "div_by", {a, s}, [a, s, og = out.grad]() {
    const auto& g = *og;
    const auto& x = *a.data;
    const double sv = (*s.data)[0];
    if (a.requires_grad) {
      auto& ga = *a.grad;
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / sv;
    }
    if (s.requires_grad) {
      double acc = 0.0;
      for (size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
      (*s.grad)[0] -= acc / (sv * sv);
    }
  });
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: empty input list");
  const int R = parts[0].rank() == 2 ? parts[0].shape[0] : -1;
  if (R < 0) throw ShapeError("concat_cols: expected 2-D tensors");
  int total = 0;
  bool req = false;
  for (const Tensor& p : parts) {
    require_2d(p, "concat_cols");
    if (p.shape[0] != R) {
      throw ShapeError("concat_cols: row mismatch " + parts[0].shape_str() + " vs " +
                       p.shape_str());
    }
    total += p.shape[1];
    req = req || tracked(p);
  }
  Tensor out = make_out({R, total}, req);
  auto& y = *out.data;
  int off = 0;
  for (const Tensor& p : parts) {
    const int C = p.shape[1];
    const auto& x = *p.data;
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j) y[i * total + off + j] = x[i * C + j];
    off += C;
  }
  attach(out, "concat_cols", parts, [parts, R, total, og = out.grad]() {
    const auto& g = *og;
    int off = 0;
    for (const Tensor& p : parts) {
      const int C = p.shape[1];
      if (p.requires_grad) {
        auto& gp = *p.grad;
        for (int i = 0; i < R; ++i)
          for (int j = 0; j < C; ++j) gp[i * C + j] += g[i * total + off + j];
      }
      off += C;
    }
  });
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty input list");
  const int C = parts[0].rank() == 2 ? parts[0].shape[1] : -1;
  if (C < 0) throw ShapeError("concat_rows: expected 2-D tensors");
  int total = 0;
  bool req = false;
  for (const Tensor& p : parts) {
    require_2d(p, "concat_rows");
    if (p.shape[1] != C) {
      throw ShapeError("concat_rows: column mismatch " + parts[0].shape_str() + " vs " +
                       p.shape_str());
    }
    total += p.shape[0];
    req = req || tracked(p);
  }
  Tensor out = make_out({total, C}, req);
  auto& y = *out.data;
  int roff = 0;
  for (const Tensor& p : parts) {
    const int R = p.shape[0];
    const auto& x = *p.data;
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j) y[(roff + i) * C + j] = x[i * C + j];
    roff += R;
  }
  attach(out, "concat_rows", parts, [parts, C, og = out.grad]() {
    const auto& g = *og;
    int roff = 0;
    for (const Tensor& p : parts) {
      const int R = p.shape[0];
      if (p.requires_grad) {
        auto& gp = *p.grad;
        for (int i = 0; i < R; ++i)
          for (int j = 0; j < C; ++j) gp[i * C + j] += g[(roff + i) * C + j];
      }
      roff += R;
    }
  });
  return out;
}

Tensor slice_cols(const Tensor& m, int start, int len) {
  require_2d(m, "slice_cols");
  const int R = m.shape[0], C = m.shape[1];
  if (start < 0 || len < 0 || start + len > C) {
    throw ShapeError("slice_cols: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of bounds for " + m.shape_str());
  }
  Tensor out = make_out({R, len}, tracked(m));
  const auto& x = *m.data;
  auto& y = *out.data;
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < len; ++j) y[i * len + j] = x[i * C + start + j];
  attach(out, "slice_cols", {m}, [m, R, C, start, len, og = out.grad]() {
    if (!m.requires_grad) return;
    const auto& g = *og;
    auto& gm = *m.grad;
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < len; ++j) gm[i * C + start + j] += g[i * len + j];
  });
  return out;
}

Tensor slice_rows(const Tensor& m, int start, int len) {
  require_2d(m, "slice_rows");
  const int R = m.shape[0], C = m.shape[1];
  if (start < 0 || len < 0 || start + len > R) {
    throw ShapeError("slice_rows: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of bounds for " + m.shape_str());
  }
  Tensor out = make_out({len, C}, tracked(m));
  const auto& x = *m.data;
  auto& y = *out.data;
  for (int i = 0; i < len; ++i)
    for (int j = 0; j < C; ++j) y[i * C + j] = x[(start + i) * C + j];
  attach(out, "slice_rows", {m}, [m, C, start, len, og = out.grad]() {
    if (!m.requires_grad) return;
    const auto& g = *og;
    auto& gm = *m.grad;
    for (int i = 0; i < len; ++i)
      for (int j = 0; j < C; ++j) gm[(start + i) * C + j] += g[i * C + j];
  });
  return out;
}

Tensor select_row(const Tensor& m, int r) {
  require_2d(m, "select_row");
  const int R = m.shape[0], C = m.shape[1];
  if (r < 0 || r >= R) {
    throw ShapeError("select_row: row " + std::to_string(r) + " out of bounds for " +
                     m.shape_str());
  }
  Tensor out = make_out({1, C}, tracked(m));
  const auto& x = *m.data;
  auto& y = *out.data;
  for (int j = 0; j < C; ++j) y[j] = x[r * C + j];
  attach(out, "select_row", {m}, [m, r, C, og = out.grad]() {
    if (!m.requires_grad) return;
    const auto& g = *og;
    auto& gm = *m.grad;
    for (int j = 0; j < C; ++j) gm[r * C + j] += g[j];
  });
  return out;
}

Tensor tanh(const Tensor& a) {
  Tensor out = make_out(a.shape, tracked(a));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(x[i]);
  check_finite(out, "tanh");
  attach(out, "tanh", {a}, [a, og = out.grad, od = out.data]() {
    if (!a.requires_grad) return;
    const auto& g = *og;
    const auto& y = *od;
    auto& ga = *a.grad;
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
  return out;
}

Tensor sigmoid(const Tensor& a) {
  Tensor out = make_out(a.shape, tracked(a));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (size_t i = 0; i < y.size(); ++i) {
    const double v = x[i];
    y[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  check_finite(out, "sigmoid");
  attach(out, "sigmoid", {a}, [a, og = out.grad, od = out.data]() {
    if (!a.requires_grad) return;
    const auto& g = *og;
    const auto& y = *od;
    auto& ga = *a.grad;
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = make_out(a.shape, tracked(a));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (size_t i = 0; i < y.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  check_finite(out, "relu");
  attach(out, "relu", {a}, [a, og = out.grad]() {
    if (!a.requires_grad) return;
    const auto& g = *og;
    const auto& x = *a.data;
    auto& ga = *a.grad;
    for (size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0.0) ga[i] += g[i];
  });
  return out;
}

Tensor exp(const Tensor& a) {
  Tensor out = make_out(a.shape, tracked(a));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (size_t i = 0; i < y.size(); ++i) y[i] = std::exp(x[i]);
  check_finite(out, "exp");
  attach(out, "exp", {a}, [a, og = out.grad, od = out.data]() {
    if (!a.requires_grad) return;
    const auto& g = *og;
    const auto& y = *od;
    auto& ga = *a.grad;
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
  });
  return out;
}

Tensor log(const Tensor& a) {
  Tensor out = make_out(a.shape, tracked(a));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (size_t i = 0; i < y.size(); ++i) {
    if (!(x[i] > 0.0)) throw NumericError("log: non-positive input");
    y[i] = std::log(x[i]);
  }
  check_finite(out, "log");
  attach(out, "log", {a}, [a, og = out.grad]() {
    if (!a.requires_grad) return;
    const auto& g = *og;
    const auto& x = *a.data;
    auto& ga = *a.grad;
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
  });
  return out;
}

Tensor softplus(const Tensor& a) {
  Tensor out = make_out(a.shape, tracked(a));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (size_t i = 0; i < y.size(); ++i) {
    const double v = x[i];
    // log(1+e^v), overflow-safe: v + log1p(e^-v) for positive v.
    y[i] = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  }
  check_finite(out, "softplus");
  attach(out, "softplus", {a}, [a, og = out.grad]() {
    if (!a.requires_grad) return;
    const auto& g = *og;
    const auto& x = *a.data;
    auto& ga = *a.grad;
    for (size_t i = 0; i < g.size(); ++i) {
      const double v = x[i];
      const double s =
          v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      ga[i] += g[i] * s;
    }
  });
  return out;
}

Tensor clamp_min(const Tensor& a, double lo) {
  Tensor out = make_out(a.shape, tracked(a));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (size_t i = 0; i < y.size(); ++i) y[i] = x[i] > lo ? x[i] : lo;
  check_finite(out, "clamp_min");
  attach(out, "clamp_min", {a}, [a, lo, og = out.grad]() {
    if (!a.requires_grad) return;
    const auto& g = *og;
    const auto& x = *a.data;
    auto& ga = *a.grad;
    for (size_t i = 0; i < g.size(); ++i)
      if (x[i] > lo) ga[i] += g[i];
  });
  return out;
}

Tensor softmax(const Tensor& a) {
  const int C = last_dim(a, "softmax");
  const int R = static_cast<int>(a.numel()) / C;
  Tensor out = make_out(a.shape, tracked(a));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (int i = 0; i < R; ++i) {
    const double* xr = x.data() + static_cast<size_t>(i) * C;
    double* yr = y.data() + static_cast<size_t>(i) * C;
    double mx = xr[0];
    for (int j = 1; j < C; ++j) mx = std::max(mx, xr[j]);
    double denom = 0.0;
    for (int j = 0; j < C; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      denom += yr[j];
    }
    for (int j = 0; j < C; ++j) yr[j] /= denom;
  }
  check_finite(out, "softmax");
  attach(out, "softmax", {a}, [a, R, C, og = out.grad, od = out.data]() {
    if (!a.requires_grad) return;
    const auto& g = *og;
    const auto& y = *od;
    auto& ga = *a.grad;
    for (int i = 0; i < R; ++i) {
      const size_t base = static_cast<size_t>(i) * C;
      double dotv = 0.0;
      for (int j = 0; j < C; ++j) dotv += g[base + j] * y[base + j];
      for (int j = 0; j < C; ++j) ga[base + j] += y[base + j] * (g[base + j] - dotv);
    }
  });
  return out;
}

Tensor log_softmax(const Tensor& a) {
  const int C = last_dim(a, "log_softmax");
  const int R = static_cast<int>(a.numel()) / C;
  Tensor out = make_out(a.shape, tracked(a));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (int i = 0; i < R; ++i) {
    const double* xr = x.data() + static_cast<size_t>(i) * C;
    double* yr = y.data() + static_cast<size_t>(i) * C;
    double mx = xr[0];
    for (int j = 1; j < C; ++j) mx = std::max(mx, xr[j]);
    double denom = 0.0;
    for (int j = 0; j < C; ++j) denom += std::exp(xr[j] - mx);
    const double lse = mx + std::log(denom);
    for (int j = 0; j < C; ++j) yr[j] = xr[j] - lse;
  }
  check_finite(out, "log_softmax");
  attach(out, "log_softmax", {a}, [a, R, C, og = out.grad, od = out.data]() {
    if (!a.requires_grad) return;
    const auto& g = *og;
    const auto& y = *od;
    auto& ga = *a.grad;
    for (int i = 0; i < R; ++i) {
      const size_t base = static_cast<size_t>(i) * C;
      double gsum = 0.0;
      for (int j = 0; j < C; ++j) gsum += g[base + j];
      for (int j = 0; j < C; ++j)
        ga[base + j] += g[base + j] - std::exp(y[base + j]) * gsum;
    }
  });
  return out;
}

Tensor sum(const Tensor& a) {
  Tensor out = make_out({}, tracked(a));
  const auto& x = *a.data;
  double acc = 0.0;
  for (double v : x) acc += v;
  (*out.data)[0] = acc;
  check_finite(out, "sum");
  attach(out, "sum", {a}, [a, og = out.grad]() {
    if (!a.requires_grad) return;
    const double g = (*og)[0];
    auto& ga = *a.grad;
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
  return out;
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.numel());
  if (n == 0.0) throw ShapeError("mean: empty tensor");
  Tensor out = make_out({}, tracked(a));
  const auto& x = *a.data;
  double acc = 0.0;
  for (double v : x) acc += v;
  (*out.data)[0] = acc / n;
  check_finite(out, "mean");
  attach(out, "mean", {a}, [a, n, og = out.grad]() {
    if (!a.requires_grad) return;
    const double g = (*og)[0] / n;
    auto& ga = *a.grad;
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
  return out;
}

Tensor sum_lastdim(const Tensor& a) {
  const int C = last_dim(a, "sum_lastdim");
  const int R = static_cast<int>(a.numel()) / C;
  std::vector<int> shape = a.shape;
  shape.back() = 1;
  Tensor out = make_out(shape, tracked(a));
  const auto& x = *a.data;
  auto& y = *out.data;
  for (int i = 0; i < R; ++i) {
    double acc = 0.0;
    for (int j = 0; j < C; ++j) acc += x[static_cast<size_t>(i) * C + j];
    y[i] = acc;
  }
  check_finite(out, "sum_lastdim");
  attach(out, "sum_lastdim", {a}, [a, R, C, og = out.grad]() {
    if (!a.requires_grad) return;
    const auto& g = *og;
    auto& ga = *a.grad;
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j) ga[static_cast<size_t>(i) * C + j] += g[i];
  });
  return out;
}

Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  require_2d(table, "embedding");
  const int V = table.shape[0], D = table.shape[1];
  const int L = static_cast<int>(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= V) {
      throw ShapeError("embedding: id " + std::to_string(id) + " out of range [0," +
                       std::to_string(V) + ")");
    }
  }
  Tensor out = make_out({L, D}, tracked(table));
  const auto& x = *table.data;
  auto& y = *out.data;
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < D; ++j)
      y[static_cast<size_t>(i) * D + j] = x[static_cast<size_t>(ids[i]) * D + j];
  attach(out, "embedding", {table}, [table, ids, L, D, og = out.grad]() {
    if (!table.requires_grad) return;
    const auto& g = *og;
    auto& gt = *table.grad;
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < D; ++j)
        gt[static_cast<size_t>(ids[i]) * D + j] += g[static_cast<size_t>(i) * D + j];
  });
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const int C = last_dim(x, "layer_norm");
  const int R = static_cast<int>(x.numel()) / C;
  if (row_width(gain, "layer_norm") != C || row_width(bias, "layer_norm") != C) {
    throw ShapeError("layer_norm: gain/bias width mismatch with " + x.shape_str());
  }
  Tensor out = make_out(x.shape, tracked(x) || tracked(gain) || tracked(bias));
  // Cached per row for the backward pass: normalized values and 1/sqrt(var+eps).
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto rstd = std::make_shared<std::vector<double>>(R);
  {
    const auto& xv = *x.data;
    const auto& gv = *gain.data;
    const auto& bv = *bias.data;
    auto& y = *out.data;
    for (int i = 0; i < R; ++i) {
      const size_t base = static_cast<size_t>(i) * C;
      double mu = 0.0;
      for (int j = 0; j < C; ++j) mu += xv[base + j];
      mu /= C;
      double var = 0.0;
      for (int j = 0; j < C; ++j) {
        const double d = xv[base + j] - mu;
        var += d * d;
      }
      var /= C;
      const double rs = 1.0 / std::sqrt(var + eps);
      (*rstd)[i] = rs;
      for (int j = 0; j < C; ++j) {
        const double h = (xv[base + j] - mu) * rs;
        (*xhat)[base + j] = h;
        y[base + j] = h * gv[j] + bv[j];
      }
    }
  }
  check_finite(out, "layer_norm");
  attach(out, "layer_norm", {x, gain, bias},
         [x, gain, bias, R, C, xhat, rstd, og = out.grad]() {
           const auto& g = *og;
           const auto& gv = *gain.data;
           for (int i = 0; i < R; ++i) {
             const size_t base = static_cast<size_t>(i) * C;
             if (x.requires_grad) {
               double m1 = 0.0, m2 = 0.0;
               for (int j = 0; j < C; ++j) {
                 const double gg = g[base + j] * gv[j];
                 m1 += gg;
                 m2 += gg * (*xhat)[base + j];
               }
               m1 /= C;
               m2 /= C;
               auto& gx = *x.grad;
               for (int j = 0; j < C; ++j) {
                 const double gg = g[base + j] * gv[j];
                 gx[base + j] += (gg - m1 - (*xhat)[base + j] * m2) * (*rstd)[i];
               }
             }
             if (gain.requires_grad) {
               auto& gg = *gain.grad;
               for (int j = 0; j < C; ++j) gg[j] += g[base + j] * (*xhat)[base + j];
             }
             if (bias.requires_grad) {
               auto& gb = *bias.grad;
               for (int j = 0; j < C; ++j) gb[j] += g[base + j];
             }
           }
         });
  return out;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& mask) {
  require_2d(q, "attention");
  require_2d(k, "attention");
  require_2d(v, "attention");
  if (q.shape[1] != k.shape[1]) {
    throw ShapeError("attention: query/key width mismatch " + q.shape_str() + " vs " +
                     k.shape_str());
  }
  if (k.shape[0] != v.shape[0]) {
    throw ShapeError("attention: key/value length mismatch " + k.shape_str() + " vs " +
                     v.shape_str());
  }
  Tensor scores = mul_scalar(matmul(q, transpose(k)), 1.0 / std::sqrt(double(q.shape[1])));
  if (mask.data) {
    if (mask.shape != scores.shape) {
      throw ShapeError("attention: mask shape " + mask.shape_str() + " does not match " +
                       scores.shape_str());
    }
    scores = add(scores, mask);
  }
  return matmul(softmax(scores), v);
}

}  // namespace ops
}  // namespace topicflow
