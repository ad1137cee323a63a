#include "pointdep/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pointdep/error.hpp"

namespace pointdep::ad {

struct Node {
  std::string op;
  std::vector<std::size_t> parents;
  Matrix value;
  Matrix adjoint;
  bool evaluated = false;
  ForwardFn forward;    // empty for leaves
  BackwardFn backward;  // empty for leaves
  std::string param_name;
};

struct GraphImpl {
  std::vector<Node> nodes;

  static GraphImpl& of(Var v) {
    if (v.graph_ == nullptr) throw UsageError("use of an unbound variable");
    return *v.graph_;
  }

  Var push(Node node) {
    nodes.push_back(std::move(node));
    return Var(this, nodes.size() - 1);
  }

  Var record(std::string op, const std::vector<Var>& parents, ForwardFn f,
             BackwardFn b) {
    Node n;
    n.op = std::move(op);
    for (const Var& p : parents) {
      if (p.graph_ != this) throw UsageError("op '" + n.op + "': operands from different graphs");
      n.parents.push_back(p.id_);
    }
    n.forward = std::move(f);
    n.backward = std::move(b);
    return push(std::move(n));
  }

  std::vector<char> ancestors(std::size_t root) const {
    std::vector<char> mark(root + 1, 0);
    std::vector<std::size_t> stack{root};
    mark[root] = 1;
    while (!stack.empty()) {
      std::size_t id = stack.back();
      stack.pop_back();
      for (std::size_t p : nodes[id].parents) {
        if (!mark[p]) {
          mark[p] = 1;
          stack.push_back(p);
        }
      }
    }
    return mark;
  }

  void run_forward(std::size_t root) {
    auto mark = ancestors(root);
    for (std::size_t id = 0; id <= root; ++id) {
      Node& n = nodes[id];
      if (!mark[id] || n.evaluated) continue;
      Inputs in;
      in.reserve(n.parents.size());
      for (std::size_t p : n.parents) in.push_back(&nodes[p].value);
      n.value = n.forward(in);
      n.evaluated = true;
    }
  }
};

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

[[noreturn]] void shape_error(std::string_view op, const Matrix& a,
                              const Matrix& b) {
  std::ostringstream os;
  os << "op '" << op << "': shape mismatch " << shape_str(a) << " vs "
     << shape_str(b);
  throw StructuralError(os.str());
}

void require_nonempty(std::string_view op, const Matrix& a) {
  if (a.size() == 0) throw UsageError("op '" + std::string(op) + "': empty operand");
}

enum class Broadcast { Same, Row, Scalar };

Broadcast broadcast_kind(std::string_view op, const Matrix& a,
                         const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::Same;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::Scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
  shape_error(op, a, b);
}

Matrix expand(const Matrix& b, Broadcast k, Eigen::Index rows,
              Eigen::Index cols) {
  switch (k) {
    case Broadcast::Row:
      return b.replicate(rows, 1);
    case Broadcast::Scalar:
      return Matrix::Constant(rows, cols, b(0, 0));
    case Broadcast::Same:
      break;
  }
  return b;
}

// Reduces an adjoint of the broadcast shape back onto b's shape.
void reduce_into(Matrix& b_adj, const Matrix& g, Broadcast k) {
  switch (k) {
    case Broadcast::Same:
      b_adj += g;
      break;
    case Broadcast::Row:
      b_adj += g.colwise().sum();
      break;
    case Broadcast::Scalar:
      b_adj(0, 0) += g.sum();
      break;
  }
}

template <class F, class D>
Var unary(std::string op, Var a, F f, D dfdx) {
  return GraphImpl::of(a).record(
      std::move(op), {a},
      [f](const Inputs& in) -> Matrix { return in[0]->unaryExpr(f); },
      [dfdx](const Matrix& go, const Matrix& out, const Inputs& in,
             std::vector<Matrix*>& ga) {
        const Matrix& x = *in[0];
        Matrix& gx = *ga[0];
        for (Eigen::Index k = 0; k < x.size(); ++k)
          gx(k) += go(k) * dfdx(x(k), out(k));
      });
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph

Graph::Graph() : impl_(std::make_unique<GraphImpl>()) {}
Graph::~Graph() = default;
Graph::Graph(Graph&&) noexcept = default;
Graph& Graph::operator=(Graph&&) noexcept = default;

GraphImpl& Graph::impl_of(Var v) const {
  if (&GraphImpl::of(v) != impl_.get() || v.id_ >= impl_->nodes.size())
    throw UsageError("variable does not belong to this graph");
  return *impl_;
}

Var Graph::constant(Matrix value) {
  Node n;
  n.op = "const";
  n.value = std::move(value);
  n.evaluated = true;
  return impl_->push(std::move(n));
}

Var Graph::constant(double value) {
  return constant(Matrix::Constant(1, 1, value));
}

Var Graph::parameter(const std::string& name, const Matrix& value) {
  Node n;
  n.op = "param";
  n.value = value;
  n.evaluated = true;
  n.param_name = name;
  return impl_->push(std::move(n));
}

std::map<std::string, Var> Graph::bind(const ParamSet& params) {
  std::map<std::string, Var> out;
  for (const auto& [name, value] : params)
    out.emplace(name, parameter(name, value));
  return out;
}

Var Graph::record(std::string op, std::vector<Var> parents, ForwardFn forward,
                  BackwardFn backward) {
  return impl_->record(std::move(op), parents, std::move(forward),
                       std::move(backward));
}

const Matrix& Graph::forward(Var root) {
  GraphImpl& g = impl_of(root);
  g.run_forward(root.id_);
  return g.nodes[root.id_].value;
}

double Graph::evaluate(Var root) {
  const Matrix& v = forward(root);
  if (v.rows() != 1 || v.cols() != 1) {
    throw StructuralError("evaluate: root '" + impl_->nodes[root.id_].op +
                          "' is " + shape_str(v) + ", expected 1x1");
  }
  return v(0, 0);
}

GradientMap Graph::backward(Var root) {
  GraphImpl& g = impl_of(root);
  auto mark = g.ancestors(root.id_);
  for (std::size_t id = 0; id <= root.id_; ++id) {
    if (mark[id] && !g.nodes[id].evaluated)
      throw UsageError("backward called before forward evaluation of '" +
                       g.nodes[root.id_].op + "'");
  }
  for (std::size_t id = 0; id <= root.id_; ++id) {
    if (!mark[id]) continue;
    Node& n = g.nodes[id];
    n.adjoint = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  g.nodes[root.id_].adjoint.setOnes();

  Inputs in;
  std::vector<Matrix*> in_adj;
  for (std::size_t id = root.id_ + 1; id-- > 0;) {
    if (!mark[id]) continue;
    Node& n = g.nodes[id];
    if (!n.backward) continue;
    in.clear();
    in_adj.clear();
    for (std::size_t p : n.parents) {
      in.push_back(&g.nodes[p].value);
      in_adj.push_back(&g.nodes[p].adjoint);
    }
    n.backward(n.adjoint, n.value, in, in_adj);
  }

  GradientMap grads;
  for (std::size_t id = 0; id < g.nodes.size(); ++id) {
    const Node& n = g.nodes[id];
    if (n.param_name.empty()) continue;
    Matrix contrib = (id <= root.id_ && mark[id])
                         ? n.adjoint
                         : Matrix::Zero(n.value.rows(), n.value.cols());
    auto it = grads.find(n.param_name);
    if (it == grads.end())
      grads.emplace(n.param_name, std::move(contrib));
    else
      it->second += contrib;
  }
  return grads;
}

bool Graph::evaluated(Var v) const { return impl_of(v).nodes[v.id_].evaluated; }

const Matrix& Graph::value(Var v) const {
  const Node& n = impl_of(v).nodes[v.id_];
  if (!n.evaluated)
    throw UsageError("value of '" + n.op + "' read before evaluation");
  return n.value;
}

const Matrix& Graph::adjoint(Var v) const {
  return impl_of(v).nodes[v.id_].adjoint;
}

std::string_view Graph::op_tag(Var v) const {
  return impl_of(v).nodes[v.id_].op;
}

std::vector<std::size_t> Graph::parents(Var v) const {
  return impl_of(v).nodes[v.id_].parents;
}

std::size_t Graph::size() const { return impl_->nodes.size(); }

// ---------------------------------------------------------------------------
// Scalar helpers

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double logsumexp(const double* values, std::size_t n) {
  if (n == 0) throw UsageError("logsumexp of an empty range");
  double m = *std::max_element(values, values + n);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(values[i] - m);
  return m + std::log(s);
}

// ---------------------------------------------------------------------------
// Ops

Var add(Var a, Var b) {
  return GraphImpl::of(a).record(
      "add", {a, b},
      [](const Inputs& in) -> Matrix {
        auto k = broadcast_kind("add", *in[0], *in[1]);
        return *in[0] + expand(*in[1], k, in[0]->rows(), in[0]->cols());
      },
      [](const Matrix& go, const Matrix&, const Inputs& in,
         std::vector<Matrix*>& ga) {
        *ga[0] += go;
        reduce_into(*ga[1], go, broadcast_kind("add", *in[0], *in[1]));
      });
}

Var sub(Var a, Var b) {
  return GraphImpl::of(a).record(
      "sub", {a, b},
      [](const Inputs& in) -> Matrix {
        auto k = broadcast_kind("sub", *in[0], *in[1]);
        return *in[0] - expand(*in[1], k, in[0]->rows(), in[0]->cols());
      },
      [](const Matrix& go, const Matrix&, const Inputs& in,
         std::vector<Matrix*>& ga) {
        *ga[0] += go;
        Matrix neg_go = -go;
        reduce_into(*ga[1], neg_go, broadcast_kind("sub", *in[0], *in[1]));
      });
}

Var mul(Var a, Var b) {
  return GraphImpl::of(a).record(
      "mul", {a, b},
      [](const Inputs& in) -> Matrix {
        auto k = broadcast_kind("mul", *in[0], *in[1]);
        return in[0]->cwiseProduct(
            expand(*in[1], k, in[0]->rows(), in[0]->cols()));
      },
      [](const Matrix& go, const Matrix&, const Inputs& in,
         std::vector<Matrix*>& ga) {
        auto k = broadcast_kind("mul", *in[0], *in[1]);
        Matrix bx = expand(*in[1], k, in[0]->rows(), in[0]->cols());
        *ga[0] += go.cwiseProduct(bx);
        Matrix gb = go.cwiseProduct(*in[0]);
        reduce_into(*ga[1], gb, k);
      });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double s) {
  return GraphImpl::of(a).record(
      "scale", {a}, [s](const Inputs& in) -> Matrix { return *in[0] * s; },
      [s](const Matrix& go, const Matrix&, const Inputs&,
          std::vector<Matrix*>& ga) { *ga[0] += go * s; });
}

Var add_scalar(Var a, double s) {
  return GraphImpl::of(a).record(
      "add_scalar", {a},
      [s](const Inputs& in) -> Matrix {
        return (in[0]->array() + s).matrix();
      },
      [](const Matrix& go, const Matrix&, const Inputs&,
         std::vector<Matrix*>& ga) { *ga[0] += go; });
}

Var add_const(Var a, const Matrix& c) {
  return GraphImpl::of(a).record(
      "add_const", {a},
      [c](const Inputs& in) -> Matrix {
        if (in[0]->rows() != c.rows() || in[0]->cols() != c.cols())
          shape_error("add_const", *in[0], c);
        return *in[0] + c;
      },
      [](const Matrix& go, const Matrix&, const Inputs&,
         std::vector<Matrix*>& ga) { *ga[0] += go; });
}

Var matmul(Var a, Var b) {
  return GraphImpl::of(a).record(
      "matmul", {a, b},
      [](const Inputs& in) -> Matrix {
        if (in[0]->cols() != in[1]->rows()) shape_error("matmul", *in[0], *in[1]);
        return (*in[0]) * (*in[1]);
      },
      [](const Matrix& go, const Matrix&, const Inputs& in,
         std::vector<Matrix*>& ga) {
        ga[0]->noalias() += go * in[1]->transpose();
        ga[1]->noalias() += in[0]->transpose() * go;
      });
}

Var transpose(Var a) {
  return GraphImpl::of(a).record(
      "transpose", {a},
      [](const Inputs& in) -> Matrix { return in[0]->transpose(); },
      [](const Matrix& go, const Matrix&, const Inputs&,
         std::vector<Matrix*>& ga) { *ga[0] += go.transpose(); });
}

Var relu(Var a) {
  return GraphImpl::of(a).record(
      "relu", {a},
      [](const Inputs& in) -> Matrix { return in[0]->cwiseMax(0.0); },
      [](const Matrix& go, const Matrix&, const Inputs& in,
         std::vector<Matrix*>& ga) {
        *ga[0] += (in[0]->array() > 0.0).select(go, 0.0).matrix();
      });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(
      "square", a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a, [](double x) { return sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a) {
  return unary(
      "softplus", a, [](double x) { return softplus(x); },
      [](double x, double) { return sigmoid(x); });
}

Var log_sigmoid(Var a) {
  return unary(
      "log_sigmoid", a, [](double x) { return log_sigmoid(x); },
      [](double x, double) { return sigmoid(-x); });
}

Var sum(Var a) {
  return GraphImpl::of(a).record(
      "sum", {a},
      [](const Inputs& in) -> Matrix {
        return Matrix::Constant(1, 1, in[0]->sum());
      },
      [](const Matrix& go, const Matrix&, const Inputs&,
         std::vector<Matrix*>& ga) { ga[0]->array() += go(0, 0); });
}

Var mean(Var a) {
  return GraphImpl::of(a).record(
      "mean", {a},
      [](const Inputs& in) -> Matrix {
        require_nonempty("mean", *in[0]);
        return Matrix::Constant(1, 1, in[0]->mean());
      },
      [](const Matrix& go, const Matrix&, const Inputs& in,
         std::vector<Matrix*>& ga) {
        ga[0]->array() += go(0, 0) / static_cast<double>(in[0]->size());
      });
}

Var logsumexp(Var a) {
  return GraphImpl::of(a).record(
      "logsumexp", {a},
      [](const Inputs& in) -> Matrix {
        require_nonempty("logsumexp", *in[0]);
        return Matrix::Constant(1, 1, logsumexp(in[0]->data(), in[0]->size()));
      },
      [](const Matrix& go, const Matrix& out, const Inputs& in,
         std::vector<Matrix*>& ga) {
        ga[0]->array() += go(0, 0) * (in[0]->array() - out(0, 0)).exp();
      });
}

Var logmeanexp(Var a) {
  return GraphImpl::of(a).record(
      "logmeanexp", {a},
      [](const Inputs& in) -> Matrix {
        require_nonempty("logmeanexp", *in[0]);
        const double n = static_cast<double>(in[0]->size());
        return Matrix::Constant(
            1, 1, logsumexp(in[0]->data(), in[0]->size()) - std::log(n));
      },
      [](const Matrix& go, const Matrix& out, const Inputs& in,
         std::vector<Matrix*>& ga) {
        const double n = static_cast<double>(in[0]->size());
        ga[0]->array() +=
            go(0, 0) * (in[0]->array() - out(0, 0) - std::log(n)).exp();
      });
}

Var weighted_sum(Var a, const Matrix& weights) {
  return GraphImpl::of(a).record(
      "weighted_sum", {a},
      [weights](const Inputs& in) -> Matrix {
        if (in[0]->rows() != weights.rows() || in[0]->cols() != weights.cols())
          shape_error("weighted_sum", *in[0], weights);
        return Matrix::Constant(1, 1, in[0]->cwiseProduct(weights).sum());
      },
      [weights](const Matrix& go, const Matrix&, const Inputs&,
                std::vector<Matrix*>& ga) { *ga[0] += go(0, 0) * weights; });
}

Var logsumexp_rows(Var a) {
  return GraphImpl::of(a).record(
      "logsumexp_rows", {a},
      [](const Inputs& in) -> Matrix {
        const Matrix& x = *in[0];
        if (x.cols() == 0) throw UsageError("op 'logsumexp_rows': empty rows");
        Eigen::VectorXd m = x.rowwise().maxCoeff();
        Eigen::VectorXd s =
            (x.colwise() - m).array().exp().rowwise().sum().log().matrix();
        return (m + s).eval();
      },
      [](const Matrix& go, const Matrix& out, const Inputs& in,
         std::vector<Matrix*>& ga) {
        Matrix soft = (in[0]->colwise() - out.col(0)).array().exp().matrix();
        ga[0]->array() += soft.array().colwise() * go.col(0).array();
      });
}

Var logmeanexp_rows(Var a) {
  return GraphImpl::of(a).record(
      "logmeanexp_rows", {a},
      [](const Inputs& in) -> Matrix {
        const Matrix& x = *in[0];
        if (x.cols() == 0) throw UsageError("op 'logmeanexp_rows': empty rows");
        Eigen::VectorXd m = x.rowwise().maxCoeff();
        Eigen::VectorXd s =
            (x.colwise() - m).array().exp().rowwise().mean().log().matrix();
        return (m + s).eval();
      },
      [](const Matrix& go, const Matrix& out, const Inputs& in,
         std::vector<Matrix*>& ga) {
        const double n = static_cast<double>(in[0]->cols());
        Matrix soft = ((in[0]->colwise() - out.col(0)).array().exp() / n).matrix();
        ga[0]->array() += soft.array().colwise() * go.col(0).array();
      });
}

Var rowwise_dot(Var a, Var b) {
  return GraphImpl::of(a).record(
      "rowwise_dot", {a, b},
      [](const Inputs& in) -> Matrix {
        if (in[0]->rows() != in[1]->rows() || in[0]->cols() != in[1]->cols())
          shape_error("rowwise_dot", *in[0], *in[1]);
        return in[0]->cwiseProduct(*in[1]).rowwise().sum();
      },
      [](const Matrix& go, const Matrix&, const Inputs& in,
         std::vector<Matrix*>& ga) {
        *ga[0] += (in[1]->array().colwise() * go.col(0).array()).matrix();
        *ga[1] += (in[0]->array().colwise() * go.col(0).array()).matrix();
      });
}

Var diag(Var a) {
  return GraphImpl::of(a).record(
      "diag", {a},
      [](const Inputs& in) -> Matrix {
        if (in[0]->rows() != in[0]->cols())
          throw StructuralError("op 'diag': matrix is " + shape_str(*in[0]) +
                                ", expected square");
        return in[0]->diagonal();
      },
      [](const Matrix& go, const Matrix&, const Inputs&,
         std::vector<Matrix*>& ga) { ga[0]->diagonal() += go.col(0); });
}

Var gather_rows(Var a, std::vector<int> index) {
  return GraphImpl::of(a).record(
      "gather_rows", {a},
      [index](const Inputs& in) -> Matrix {
        const Matrix& x = *in[0];
        Matrix out(static_cast<Eigen::Index>(index.size()), x.cols());
        for (std::size_t i = 0; i < index.size(); ++i) {
          if (index[i] < 0 || index[i] >= x.rows())
            throw StructuralError("op 'gather_rows': index out of range");
          out.row(static_cast<Eigen::Index>(i)) = x.row(index[i]);
        }
        return out;
      },
      [index](const Matrix& go, const Matrix&, const Inputs&,
              std::vector<Matrix*>& ga) {
        for (std::size_t i = 0; i < index.size(); ++i)
          ga[0]->row(index[i]) += go.row(static_cast<Eigen::Index>(i));
      });
}

Var pairwise_relu_head(Var a, Var b, Var bias, Var w) {
  return GraphImpl::of(a).record(
      "pairwise_relu_head", {a, b, bias, w},
      [](const Inputs& in) -> Matrix {
        const Matrix& A = *in[0];
        const Matrix& B = *in[1];
        const Matrix& bias = *in[2];
        const Matrix& w = *in[3];
        if (A.cols() != B.cols()) shape_error("pairwise_relu_head", A, B);
        if (bias.rows() != 1 || bias.cols() != A.cols())
          shape_error("pairwise_relu_head", A, bias);
        if (w.rows() != A.cols() || w.cols() != 1)
          shape_error("pairwise_relu_head", A, w);
        // Accumulate one hidden unit at a time down a column of the output;
        // the inner loop runs over contiguous rows of A and vectorises
        // without materialising the n*m*H activations.
        const Matrix Ab = A.rowwise() + bias.row(0);
        const Eigen::Index n = Ab.rows();
        Matrix out = Matrix::Zero(n, B.rows());
        for (Eigen::Index j = 0; j < B.rows(); ++j) {
          double* oj = out.col(j).data();
          for (Eigen::Index h = 0; h < Ab.cols(); ++h) {
            const double* ah = Ab.col(h).data();
            const double bjh = B(j, h);
            const double wh = w(h, 0);
            for (Eigen::Index i = 0; i < n; ++i) {
              const double p = ah[i] + bjh;
              oj[i] += wh * (p > 0.0 ? p : 0.0);
            }
          }
        }
        return out;
      },
      [](const Matrix& go, const Matrix&, const Inputs& in,
         std::vector<Matrix*>& ga) {
        const Matrix& A = *in[0];
        const Matrix& B = *in[1];
        const Matrix At = (A.rowwise() + in[2]->row(0)).transpose();
        const Matrix Bt = B.transpose();
        const Eigen::Index hidden = At.rows();
        // With m_ij = [a_i + b_j > 0] * go_ij (per hidden unit):
        //   dA_i = w * sum_j m_ij,  dB_j = w * sum_i m_ij,
        //   dw   = sum_ij relu(a_i + b_j) * go_ij.
        Matrix sa = Matrix::Zero(hidden, At.cols());
        Matrix sb = Matrix::Zero(hidden, Bt.cols());
        Eigen::VectorXd dw = Eigen::VectorXd::Zero(hidden);
        double* dwp = dw.data();
        for (Eigen::Index j = 0; j < Bt.cols(); ++j) {
          const double* bj = Bt.col(j).data();
          double* sbj = sb.col(j).data();
          for (Eigen::Index i = 0; i < At.cols(); ++i) {
            const double g = go(i, j);
            if (g == 0.0) continue;
            const double* ai = At.col(i).data();
            double* sai = sa.col(i).data();
            for (Eigen::Index h = 0; h < hidden; ++h) {
              const double p = ai[h] + bj[h];
              const double m = p > 0.0 ? g : 0.0;
              sai[h] += m;
              sbj[h] += m;
              dwp[h] += p * m;
            }
          }
        }
        const Eigen::VectorXd w = in[3]->col(0);
        sa.array().colwise() *= w.array();
        sb.array().colwise() *= w.array();
        *ga[0] += sa.transpose();
        *ga[1] += sb.transpose();
        *ga[2] += sa.rowwise().sum().transpose();
        ga[3]->col(0) += dw;
      });
}

// ---------------------------------------------------------------------------
// Finite differences

GradientMap finite_difference_grad(
    const std::function<double(const ParamSet&)>& loss, const ParamSet& params,
    double step) {
  if (!(step > 0.0)) throw UsageError("finite_difference_grad: step must be > 0");
  ParamSet work = params;
  GradientMap grads;
  for (auto& [name, value] : work) {
    Matrix g(value.rows(), value.cols());
    for (Eigen::Index k = 0; k < value.size(); ++k) {
      const double orig = value(k);
      value(k) = orig + step;
      const double up = loss(work);
      value(k) = orig - step;
      const double down = loss(work);
      value(k) = orig;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericalError("finite_difference_grad: non-finite loss while "
                             "perturbing '" + name + "'");
      g(k) = (up - down) / (2.0 * step);
    }
    grads.emplace(name, std::move(g));
  }
  return grads;
}

double max_relative_error(const GradientMap& a, const GradientMap& b,
                          double floor) {
  double worst = 0.0;
  for (const auto& [name, ga] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second.rows() != ga.rows() ||
        it->second.cols() != ga.cols())
      throw StructuralError("gradient maps disagree on parameter '" + name + "'");
    const Matrix& gb = it->second;
    for (Eigen::Index k = 0; k < ga.size(); ++k) {
      double denom = std::max({std::abs(ga(k)), std::abs(gb(k)), floor});
      worst = std::max(worst, std::abs(ga(k) - gb(k)) / denom);
    }
  }
  if (a.size() != b.size())
    throw StructuralError("gradient maps cover different parameter sets");
  return worst;
}

}  // namespace pointdep::ad
