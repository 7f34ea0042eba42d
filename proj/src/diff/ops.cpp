#include "dfac/diff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "dfac/error.hpp"

namespace dfac::diff {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

MapC as_matrix(const Tensor& t) { return MapC(t.data(), t.rows(), t.cols()); }
Map as_matrix(Tensor& t) { return Map(t.data(), t.rows(), t.cols()); }

[[noreturn]] void shape_fail(Graph& g, const char* op, const std::string& detail) {
  throw ShapeError("node " + std::to_string(g.next_id()) + " (" + op + "): " + detail);
}

Graph& graph_of(Var a, const char* op) {
  if (a.graph == nullptr) throw StateError(std::string(op) + ": unbound variable");
  return *a.graph;
}

void require_rank2(Graph& g, const char* op, const Tensor& t, const char* which) {
  if (t.rank() != 2) shape_fail(g, op, std::string(which) + " must be a matrix, got " + shape_string(t.shape()));
}

void require_same(Graph& g, const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    shape_fail(g, op, "shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) + " differ");
}

template <class F, class D>
Var unary(Var a, const char* op, F f, D df) {
  Graph& g = graph_of(a, op);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return g.record(op, std::move(y), {a}, [a, df](const Tensor& out, const Tensor& og, std::vector<Tensor*>& in) {
    const Tensor& x = a.value();
    Tensor& gx = *in[0];
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += og[i] * df(x[i], out[i]);
  });
}

}  // namespace

Var matmul(Var x, Var w) {
  Graph& g = graph_of(x, "matmul");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  require_rank2(g, "matmul", xv, "input");
  require_rank2(g, "matmul", wv, "weight");
  if (xv.cols() != wv.rows())
    shape_fail(g, "matmul", "input " + shape_string(xv.shape()) + " incompatible with weight " + shape_string(wv.shape()));
  Tensor y(Shape{xv.rows(), wv.cols()});
  as_matrix(y).noalias() = as_matrix(xv) * as_matrix(wv);
  return g.record("matmul", std::move(y), {x, w}, [x, w](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
    if (in[0]) as_matrix(*in[0]).noalias() += as_matrix(og) * as_matrix(w.value()).transpose();
    if (in[1]) as_matrix(*in[1]).noalias() += as_matrix(x.value()).transpose() * as_matrix(og);
  });
}

Var affine(Var x, Var w, Var b) {
  Graph& g = graph_of(x, "affine");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  require_rank2(g, "affine", xv, "input");
  require_rank2(g, "affine", wv, "weight");
  if (xv.cols() != wv.rows())
    shape_fail(g, "affine", "input " + shape_string(xv.shape()) + " incompatible with weight " + shape_string(wv.shape()));
  if (bv.rank() != 1 || bv.size() != wv.cols())
    shape_fail(g, "affine", "bias " + shape_string(bv.shape()) + " does not match " + std::to_string(wv.cols()) + " outputs");
  Tensor y(Shape{xv.rows(), wv.cols()});
  auto ym = as_matrix(y);
  ym.noalias() = as_matrix(xv) * as_matrix(wv);
  ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bv.data(), bv.size());
  return g.record("affine", std::move(y), {x, w, b}, [x, w](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
    auto ogm = as_matrix(og);
    if (in[0]) as_matrix(*in[0]).noalias() += ogm * as_matrix(w.value()).transpose();
    if (in[1]) as_matrix(*in[1]).noalias() += as_matrix(x.value()).transpose() * ogm;
    if (in[2]) Eigen::Map<Eigen::RowVectorXd>(in[2]->data(), in[2]->size()) += ogm.colwise().sum();
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, "add");
  require_same(g, "add", a.value(), b.value());
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return g.record("add", std::move(y), {a, b}, [](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
    for (Tensor* t : in)
      if (t)
        for (std::size_t i = 0; i < og.size(); ++i) (*t)[i] += og[i];
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, "sub");
  require_same(g, "sub", a.value(), b.value());
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return g.record("sub", std::move(y), {a, b}, [](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
    if (in[0])
      for (std::size_t i = 0; i < og.size(); ++i) (*in[0])[i] += og[i];
    if (in[1])
      for (std::size_t i = 0; i < og.size(); ++i) (*in[1])[i] -= og[i];
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, "mul");
  require_same(g, "mul", a.value(), b.value());
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return g.record("mul", std::move(y), {a, b}, [a, b](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (in[0])
      for (std::size_t i = 0; i < og.size(); ++i) (*in[0])[i] += og[i] * bv[i];
    if (in[1])
      for (std::size_t i = 0; i < og.size(); ++i) (*in[1])[i] += og[i] * av[i];
  });
}

Var scale(Var a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var relu(Var a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var elu(Var a) {
  return unary(
      a, "elu", [](double x) { return x > 0.0 ? x : std::expm1(x); },
      [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Var abs(Var a) {
  return unary(
      a, "abs", [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var cosine(Var a) {
  return unary(a, "cos", [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Var exp(Var a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log_floor(Var a, double floor) {
  return unary(
      a, "log", [floor](double x) { return std::log(std::max(x, floor)); },
      [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Var softplus(Var a) {
  return unary(
      a, "softplus", [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var sigmoid(Var a) {
  return unary(
      a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double, double y) { return y * (1.0 - y); });
}

Var softmax_rows(Var a) {
  Graph& g = graph_of(a, "softmax");
  const Tensor& x = a.value();
  require_rank2(g, "softmax", x, "input");
  const std::size_t R = x.rows(), C = x.cols();
  Tensor y(x.shape());
  for (std::size_t r = 0; r < R; ++r) {
    const double* xr = x.data() + r * C;
    double* yr = y.data() + r * C;
    const double m = *std::max_element(xr, xr + C);
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) total += (yr[c] = std::exp(xr[c] - m));
    for (std::size_t c = 0; c < C; ++c) yr[c] /= total;
  }
  return g.record("softmax", std::move(y), {a}, [R, C](const Tensor& out, const Tensor& og, std::vector<Tensor*>& in) {
    Tensor& gx = *in[0];
    for (std::size_t r = 0; r < R; ++r) {
      const double* yr = out.data() + r * C;
      const double* gr = og.data() + r * C;
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) dot += yr[c] * gr[c];
      for (std::size_t c = 0; c < C; ++c) gx[r * C + c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var sum_rows(Var a) {
  Graph& g = graph_of(a, "sum_rows");
  const Tensor& x = a.value();
  require_rank2(g, "sum_rows", x, "input");
  const std::size_t R = x.rows(), C = x.cols();
  Tensor y(Shape{R});
  for (std::size_t r = 0; r < R; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += x[r * C + c];
    y[r] = s;
  }
  return g.record("sum_rows", std::move(y), {a}, [R, C](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
    Tensor& gx = *in[0];
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) gx[r * C + c] += og[r];
  });
}

Var mean_rows(Var a) {
  Graph& g = graph_of(a, "mean_rows");
  const Tensor& x = a.value();
  require_rank2(g, "mean_rows", x, "input");
  const std::size_t R = x.rows(), C = x.cols();
  if (C == 0) shape_fail(g, "mean_rows", "empty rows");
  Tensor y(Shape{R});
  for (std::size_t r = 0; r < R; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += x[r * C + c];
    y[r] = s / static_cast<double>(C);
  }
  return g.record("mean_rows", std::move(y), {a}, [R, C](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
    Tensor& gx = *in[0];
    const double inv = 1.0 / static_cast<double>(C);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) gx[r * C + c] += og[r] * inv;
  });
}

Var max_rows(Var a) {
  Graph& g = graph_of(a, "max_rows");
  const Tensor& x = a.value();
  require_rank2(g, "max_rows", x, "input");
  const std::size_t R = x.rows(), C = x.cols();
  if (C == 0) shape_fail(g, "max_rows", "empty rows");
  Tensor y(Shape{R});
  std::vector<std::size_t> arg(R);
  for (std::size_t r = 0; r < R; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c)
      if (x[r * C + c] > x[r * C + best]) best = c;
    arg[r] = best;
    y[r] = x[r * C + best];
  }
  return g.record("max_rows", std::move(y), {a}, [C, arg](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
    Tensor& gx = *in[0];
    for (std::size_t r = 0; r < arg.size(); ++r) gx[r * C + arg[r]] += og[r];
  });
}

Var sum_over_rows(Var a) {
  Graph& g = graph_of(a, "sum_over_rows");
  const Tensor& x = a.value();
  require_rank2(g, "sum_over_rows", x, "input");
  const std::size_t R = x.rows(), C = x.cols();
  Tensor y(Shape{C});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) y[c] += x[r * C + c];
  return g.record("sum_over_rows", std::move(y), {a}, [R, C](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
    Tensor& gx = *in[0];
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) gx[r * C + c] += og[c];
  });
}

Var sum(Var a) {
  Graph& g = graph_of(a, "sum");
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return g.record("sum", Tensor::scalar(s), {a}, [](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
    const double d = og[0];
    for (double& v : in[0]->values()) v += d;
  });
}

Var mean(Var a) {
  Graph& g = graph_of(a, "mean");
  const std::size_t n = a.value().size();
  if (n == 0) shape_fail(g, "mean", "empty input");
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return g.record("mean", Tensor::scalar(s / static_cast<double>(n)), {a},
                  [n](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
                    const double d = og[0] / static_cast<double>(n);
                    for (double& v : in[0]->values()) v += d;
                  });
}

Var take(Var a, std::vector<std::size_t> indices, Shape shape) {
  Graph& g = graph_of(a, "take");
  const Tensor& x = a.value();
  if (shape_size(shape) != indices.size())
    shape_fail(g, "take", std::to_string(indices.size()) + " indices cannot fill " + shape_string(shape));
  Tensor y(std::move(shape));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= x.size())
      shape_fail(g, "take", "index " + std::to_string(indices[i]) + " out of range for " + shape_string(x.shape()));
    y[i] = x[indices[i]];
  }
  return g.record("take", std::move(y), {a},
                  [idx = std::move(indices)](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
                    Tensor& gx = *in[0];
                    for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += og[i];
                  });
}

Var reshape(Var a, Shape shape) {
  Graph& g = graph_of(a, "reshape");
  const Tensor& x = a.value();
  if (shape_size(shape) != x.size())
    shape_fail(g, "reshape", "cannot reshape " + shape_string(x.shape()) + " to " + shape_string(shape));
  return g.record("reshape", x.reshaped(std::move(shape)), {a}, [](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
    for (std::size_t i = 0; i < og.size(); ++i) (*in[0])[i] += og[i];
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Graph& g = graph_of(parts[0], "concat_cols");
  std::size_t R = 0, C = 0;
  std::vector<std::size_t> widths;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = parts[k].value();
    const std::size_t rows = t.rank() == 1 ? t.size() : t.rows();
    const std::size_t cols = t.rank() == 1 ? 1 : t.cols();
    if (t.rank() > 2) shape_fail(g, "concat_cols", "rank > 2 input");
    if (k == 0) R = rows;
    if (rows != R) shape_fail(g, "concat_cols", "row counts differ");
    widths.push_back(cols);
    C += cols;
  }
  Tensor y(Shape{R, C});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = parts[k].value();
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < widths[k]; ++c) y[r * C + offset + c] = t[r * widths[k] + c];
    offset += widths[k];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record("concat_cols", std::move(y), inputs,
                  [R, C, widths](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
                    std::size_t offset = 0;
                    for (std::size_t k = 0; k < widths.size(); ++k) {
                      if (in[k])
                        for (std::size_t r = 0; r < R; ++r)
                          for (std::size_t c = 0; c < widths[k]; ++c)
                            (*in[k])[r * widths[k] + c] += og[r * C + offset + c];
                      offset += widths[k];
                    }
                  });
}

Var repeat_cols(Var v, std::size_t cols) {
  Graph& g = graph_of(v, "repeat_cols");
  const Tensor& x = v.value();
  if (x.rank() != 1) shape_fail(g, "repeat_cols", "input must be a vector, got " + shape_string(x.shape()));
  const std::size_t R = x.size();
  Tensor y(Shape{R, cols});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = x[r];
  return g.record("repeat_cols", std::move(y), {v}, [R, cols](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
    for (std::size_t r = 0; r < R; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += og[r * cols + c];
      (*in[0])[r] += s;
    }
  });
}

Var repeat_rows(Var v, std::size_t rows) {
  Graph& g = graph_of(v, "repeat_rows");
  const Tensor& x = v.value();
  if (x.rank() != 1) shape_fail(g, "repeat_rows", "input must be a vector, got " + shape_string(x.shape()));
  const std::size_t C = x.size();
  Tensor y(Shape{rows, C});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < C; ++c) y[r * C + c] = x[c];
  return g.record("repeat_rows", std::move(y), {v}, [rows, C](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < C; ++c) (*in[0])[c] += og[r * C + c];
  });
}

Var modulated_affine(Var state, Var embed, Var w, Var b) {
  Graph& g = graph_of(state, "modulated_affine");
  const Tensor& sv = state.value();
  const Tensor& ev = embed.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  require_rank2(g, "modulated_affine", sv, "state");
  require_rank2(g, "modulated_affine", ev, "embedding");
  require_rank2(g, "modulated_affine", wv, "weight");
  const std::size_t units = sv.rows(), n = ev.rows(), h = sv.cols(), a = wv.cols();
  if (ev.cols() != h || wv.rows() != h)
    shape_fail(g, "modulated_affine", "state " + shape_string(sv.shape()) + ", embedding " + shape_string(ev.shape()) +
                                          " and weight " + shape_string(wv.shape()) + " disagree on width");
  if (bv.rank() != 1 || bv.size() != a) shape_fail(g, "modulated_affine", "bias " + shape_string(bv.shape()) + " mismatch");
  Tensor y(Shape{units * n, a});
  auto em = as_matrix(ev);
  auto wm = as_matrix(wv);
  Eigen::Map<const Eigen::RowVectorXd> bias(bv.data(), a);
  for (std::size_t u = 0; u < units; ++u) {
    Eigen::Map<const Eigen::VectorXd> s(sv.data() + u * h, h);
    RowMatrix sw = s.asDiagonal() * wm;
    Map block(y.data() + u * n * a, n, a);
    block.noalias() = em * sw;
    block.rowwise() += bias;
  }
  return g.record("modulated_affine", std::move(y), {state, embed, w, b},
                  [state, embed, w, units, n, h, a](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
                    const Tensor& sv = state.value();
                    auto em = as_matrix(embed.value());
                    auto wm = as_matrix(w.value());
                    for (std::size_t u = 0; u < units; ++u) {
                      Eigen::Map<const Eigen::VectorXd> s(sv.data() + u * h, h);
                      MapC go(og.data() + u * n * a, n, a);
                      RowMatrix et_go = em.transpose() * go;  // [H x A]
                      if (in[0]) {
                        Eigen::Map<Eigen::VectorXd> gs(in[0]->data() + u * h, h);
                        gs += et_go.cwiseProduct(wm).rowwise().sum();
                      }
                      if (in[1]) {
                        RowMatrix sw = s.asDiagonal() * wm;
                        as_matrix(*in[1]).noalias() += go * sw.transpose();
                      }
                      if (in[2]) as_matrix(*in[2]) += s.asDiagonal() * et_go;
                      if (in[3]) Eigen::Map<Eigen::RowVectorXd>(in[3]->data(), a) += go.colwise().sum();
                    }
                  });
}

}  // namespace dfac::diff
