#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dfac/diff/graph.hpp"

namespace dfac::diff {

// Dense layers.
Var matmul(Var x, Var w);          // [R x I] . [I x O] -> [R x O]
Var affine(Var x, Var w, Var b);   // matmul plus bias [O] on every row

// Element-wise binary ops on equal shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var scale(Var a, double s);
Var add_scalar(Var a, double s);

// Element-wise unary ops.
Var relu(Var a);
Var elu(Var a);
Var abs(Var a);
Var cosine(Var a);
Var exp(Var a);
/// log(max(a, floor)); the gradient is zero where the floor is active.
Var log_floor(Var a, double floor);
Var softplus(Var a);
Var sigmoid(Var a);

// Row-wise ops on [R x C].
Var softmax_rows(Var a);
Var sum_rows(Var a);    // -> [R]
Var mean_rows(Var a);   // -> [R]
Var max_rows(Var a);    // -> [R]; gradient goes to the lowest-index maximum
Var sum_over_rows(Var a);  // -> [C]

// Reductions to a scalar.
Var sum(Var a);
Var mean(Var a);

// Layout.
/// out[i] = a.flat[indices[i]], reshaped to `shape`; backward scatter-adds.
Var take(Var a, std::vector<std::size_t> indices, Shape shape);
Var reshape(Var a, Shape shape);
Var concat_cols(std::span<const Var> parts);   // [R x C_i] -> [R x sum C_i]
Var repeat_cols(Var v, std::size_t cols);      // [R] -> [R x cols]
Var repeat_rows(Var v, std::size_t rows);      // [C] -> [rows x C]

/// Implicit-quantile output layer without materialising the Hadamard product:
/// out[u * N + i, a] = sum_h state[u, h] * embed[i, h] * w[h, a] + b[a]
/// for state [U x H], embed [N x H], w [H x A], b [A]; result [(U*N) x A].
Var modulated_affine(Var state, Var embed, Var w, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator-(Var a) { return scale(a, -1.0); }

}  // namespace dfac::diff
