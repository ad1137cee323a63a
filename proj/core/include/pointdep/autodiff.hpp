#pragma once

// Reverse-mode differentiation over dense double matrices.
//
// A Graph records operations lazily (define-by-run, rebuilt per minibatch).
// Nothing is computed until evaluate()/forward() is called on a root; the
// forward pass then runs over the root's ancestors in creation order, which
// is a topological order because a node can only reference nodes created
// before it. backward() walks the same set in reverse.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace pointdep::ad {

using Matrix = Eigen::MatrixXd;
using ParamSet = std::map<std::string, Matrix>;
using GradientMap = std::map<std::string, Matrix>;

class Graph;
struct GraphImpl;

// Lightweight handle to a node. Valid while its Graph is alive.
class Var {
 public:
  Var() = default;

  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  friend struct GraphImpl;
  Var(GraphImpl* g, std::size_t id) : graph_(g), id_(id) {}

  GraphImpl* graph_ = nullptr;
  std::size_t id_ = 0;
};

using Inputs = std::vector<const Matrix*>;
using ForwardFn = std::function<Matrix(const Inputs& in)>;
// Accumulates into `in_adj` given the output adjoint and cached values.
using BackwardFn =
    std::function<void(const Matrix& out_adj, const Matrix& out_value,
                       const Inputs& in, std::vector<Matrix*>& in_adj)>;

class Graph {
 public:
  Graph();
  ~Graph();
  Graph(Graph&&) noexcept;
  Graph& operator=(Graph&&) noexcept;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  Var constant(double value);
  Var parameter(const std::string& name, const Matrix& value);
  std::map<std::string, Var> bind(const ParamSet& params);

  // Records a non-leaf node. Shape checks happen inside `forward`.
  Var record(std::string op, std::vector<Var> parents, ForwardFn forward,
             BackwardFn backward);

  // Runs the forward pass; the root must be 1x1.
  double evaluate(Var root);
  // Runs the forward pass and returns the root's value of any shape.
  const Matrix& forward(Var root);

  // Seeds the root adjoint with ones and propagates. Returns one entry per
  // bound parameter (zero-filled if the parameter does not reach the root).
  GradientMap backward(Var root);

  bool evaluated(Var v) const;
  const Matrix& value(Var v) const;
  const Matrix& adjoint(Var v) const;
  std::string_view op_tag(Var v) const;
  std::vector<std::size_t> parents(Var v) const;
  std::size_t size() const;

 private:
  GraphImpl& impl_of(Var v) const;
  std::unique_ptr<GraphImpl> impl_;
};

// Elementwise / broadcasting arithmetic. The right operand of add, sub and
// mul may be the same shape as the left, a 1xC row (added to every row), or
// 1x1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
// a + c for a constant matrix c of a's shape.
Var add_const(Var a, const Matrix& c);

Var matmul(Var a, Var b);
Var transpose(Var a);

Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var sigmoid(Var a);
// max(x,0) + log1p(exp(-|x|))
Var softplus(Var a);
// log(sigmoid(x)), evaluated without forming sigmoid(x).
Var log_sigmoid(Var a);

// Reductions producing 1x1.
Var sum(Var a);
Var mean(Var a);
Var logsumexp(Var a);
// log(mean(exp(a))) with max-shift.
Var logmeanexp(Var a);
// sum(w .* a) with a constant weight matrix of the same shape.
Var weighted_sum(Var a, const Matrix& weights);

// r x 1 results.
Var logsumexp_rows(Var a);
Var logmeanexp_rows(Var a);
Var rowwise_dot(Var a, Var b);
Var diag(Var a);
// out.row(i) = a.row(index[i]).
Var gather_rows(Var a, std::vector<int> index);

// out(i,j) = sum_h w(h) * relu(a(i,h) + b(j,h) + bias(h)).
// a: n x H, b: m x H, bias: 1 x H, w: H x 1. Equivalent to evaluating a
// one-hidden-layer head on every (i, j) combination of two precomputed
// first-layer projections, without materialising the n*m x H activations.
Var pairwise_relu_head(Var a, Var b, Var bias, Var w);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

// Numerically stable scalar helpers shared with non-graph code.
double softplus(double x);
double sigmoid(double x);
double log_sigmoid(double x);
double logsumexp(const double* values, std::size_t n);

// Central differences over every coordinate of every parameter.
GradientMap finite_difference_grad(
    const std::function<double(const ParamSet&)>& loss, const ParamSet& params,
    double step);

// Max over all coordinates of |a-b| / max(|a|, |b|, floor).
double max_relative_error(const GradientMap& a, const GradientMap& b,
                          double floor = 1e-2);

}  // namespace pointdep::ad
