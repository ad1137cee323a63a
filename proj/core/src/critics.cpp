#include "pointdep/critics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "pointdep/error.hpp"
#include "pointdep/rng.hpp"

namespace pointdep {

namespace {

struct Shape {
  std::string name;
  int rows;
  int cols;
};

std::vector<Shape> expected_shapes(const CriticDescriptor& d) {
  const int h = d.hidden;
  if (d.design == CriticDesign::Concatenate) {
    return {{"l0.wx", d.x_dim, h},
            {"l0.wy", d.y_dim, h},
            {"l0.b", 1, h},
            {"l1.w", h, 1},
            {"l1.b", 1, 1}};
  }
  std::vector<Shape> out;
  for (auto [tower, in_dim] : {std::pair{'x', d.x_dim}, std::pair{'y', d.y_dim}}) {
    std::string p(1, tower);
    out.push_back({p + ".l0.w", in_dim, h});
    out.push_back({p + ".l0.b", 1, h});
    out.push_back({p + ".l1.w", h, d.embed});
    out.push_back({p + ".l1.b", 1, d.embed});
  }
  return out;
}

void check_descriptor(const CriticDescriptor& d) {
  if (d.x_dim <= 0 || d.y_dim <= 0 || d.hidden <= 0)
    throw StructuralError("critic descriptor: dimensions must be positive");
  if (d.design != CriticDesign::Concatenate && d.embed <= 0)
    throw StructuralError("critic descriptor: embedding width must be positive");
}

void check_inputs(const CriticDescriptor& d, const Matrix& x, const Matrix& y,
                  bool aligned) {
  if (x.cols() != d.x_dim || y.cols() != d.y_dim) {
    std::ostringstream os;
    os << "critic input dims " << x.cols() << "/" << y.cols() << " do not match "
       << "descriptor " << d.x_dim << "/" << d.y_dim;
    throw StructuralError(os.str());
  }
  if (aligned && x.rows() != y.rows())
    throw StructuralError("critic: x and y batches differ in length");
}

// fan_in for the concatenate first layer is the combined input width.
int fan_in_of(const CriticDescriptor& d, const Shape& s) {
  if (d.design == CriticDesign::Concatenate && s.name.rfind("l0.w", 0) == 0)
    return d.x_dim + d.y_dim;
  return s.rows;
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& tok) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw StructuralError("checkpoint: bad number '" + tok + "'");
  return v;
}

ad::Var mlp_tower(ad::Graph& g, const BoundCritic& c, char tower,
                  const Matrix& input) {
  std::string p(1, tower);
  ad::Var in = g.constant(input);
  ad::Var h = ad::relu(ad::add(ad::matmul(in, c.at(p + ".l0.w")), c.at(p + ".l0.b")));
  return ad::add(ad::matmul(h, c.at(p + ".l1.w")), c.at(p + ".l1.b"));
}

}  // namespace

std::string_view to_string(CriticDesign design) {
  switch (design) {
    case CriticDesign::Concatenate:
      return "concatenate";
    case CriticDesign::Separate:
      return "separate";
    case CriticDesign::EncoderPair:
      return "encoder-pair";
  }
  return "unknown";
}

CriticDesign parse_design(std::string_view name) {
  if (name == "concatenate") return CriticDesign::Concatenate;
  if (name == "separate") return CriticDesign::Separate;
  if (name == "encoder-pair") return CriticDesign::EncoderPair;
  throw StructuralError("unknown critic design '" + std::string(name) + "'");
}

CriticDescriptor mi_benchmark_descriptor(int x_dim, int y_dim) {
  return {CriticDesign::Concatenate, x_dim, y_dim, 512, 1};
}

CriticDescriptor retrieval_descriptor(int x_dim, int y_dim) {
  return {CriticDesign::Separate, x_dim, y_dim, 512, 128};
}

CriticDescriptor encoder_pair_descriptor(int input_dim, int hidden, int embed) {
  return {CriticDesign::EncoderPair, input_dim, input_dim, hidden, embed};
}

CriticParams init_params(const CriticDescriptor& descriptor, std::uint64_t seed) {
  check_descriptor(descriptor);
  CriticParams p{descriptor, seed, {}};
  for (const Shape& s : expected_shapes(descriptor)) {
    Matrix m = Matrix::Zero(s.rows, s.cols);
    const bool is_bias = s.name.size() >= 2 && s.name.compare(s.name.size() - 2, 2, ".b") == 0;
    if (!is_bias) {
      const double limit = std::sqrt(6.0 / (fan_in_of(descriptor, s) + s.cols));
      Rng rng = make_rng(seed, "critic-init:" + s.name);
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = dist(rng);
    }
    p.weights.emplace(s.name, std::move(m));
  }
  return p;
}

void validate(const CriticParams& params) {
  check_descriptor(params.descriptor);
  auto shapes = expected_shapes(params.descriptor);
  if (shapes.size() != params.weights.size())
    throw StructuralError("critic params: unexpected number of tensors");
  for (const Shape& s : shapes) {
    auto it = params.weights.find(s.name);
    if (it == params.weights.end())
      throw StructuralError("critic params: missing tensor '" + s.name + "'");
    if (it->second.rows() != s.rows || it->second.cols() != s.cols)
      throw StructuralError("critic params: tensor '" + s.name + "' has wrong shape");
  }
}

ad::Var BoundCritic::at(const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) throw StructuralError("critic has no parameter '" + name + "'");
  return it->second;
}

BoundCritic bind_critic(ad::Graph& graph, const CriticParams& params) {
  return {params.descriptor, graph.bind(params.weights)};
}

ad::Var concat_critic_forward(ad::Graph& g, const BoundCritic& c,
                              const Matrix& x, const Matrix& y) {
  if (c.descriptor.design != CriticDesign::Concatenate)
    throw StructuralError("concat_critic_forward on a non-concatenate critic");
  check_inputs(c.descriptor, x, y, true);
  // W [x; y] == Wx x + Wy y, so the first layer is kept as two blocks.
  ad::Var pre = ad::add(ad::add(ad::matmul(g.constant(x), c.at("l0.wx")),
                                ad::matmul(g.constant(y), c.at("l0.wy"))),
                        c.at("l0.b"));
  return ad::add(ad::matmul(ad::relu(pre), c.at("l1.w")), c.at("l1.b"));
}

ad::Var tower_forward(ad::Graph& g, const BoundCritic& c, char tower,
                      const Matrix& input) {
  if (c.descriptor.design == CriticDesign::Concatenate)
    throw StructuralError("tower_forward on a concatenate critic");
  if (tower != 'x' && tower != 'y')
    throw StructuralError(std::string("unknown tower '") + tower + "'");
  const int dim = tower == 'x' ? c.descriptor.x_dim : c.descriptor.y_dim;
  if (input.cols() != dim)
    throw StructuralError("tower input dim does not match descriptor");
  return mlp_tower(g, c, tower, input);
}

ad::Var separate_critic_forward(ad::Graph& g, const BoundCritic& c,
                                const Matrix& x, const Matrix& y) {
  check_inputs(c.descriptor, x, y, true);
  return ad::rowwise_dot(tower_forward(g, c, 'x', x), tower_forward(g, c, 'y', y));
}

ad::Var pair_scores(ad::Graph& g, const BoundCritic& c, const Matrix& x,
                    const Matrix& y) {
  if (c.descriptor.design == CriticDesign::Concatenate)
    return concat_critic_forward(g, c, x, y);
  return separate_critic_forward(g, c, x, y);
}

JointProductScores joint_and_product_scores(ad::Graph& g, const BoundCritic& c,
                                            const Matrix& x, const Matrix& y,
                                            const std::vector<int>& perm) {
  check_inputs(c.descriptor, x, y, true);
  if (static_cast<Eigen::Index>(perm.size()) != y.rows())
    throw StructuralError("joint_and_product_scores: permutation length mismatch");
  if (c.descriptor.design == CriticDesign::Concatenate) {
    ad::Var a = ad::add(ad::matmul(g.constant(x), c.at("l0.wx")), c.at("l0.b"));
    ad::Var b = ad::matmul(g.constant(y), c.at("l0.wy"));
    auto head = [&](ad::Var pre) {
      return ad::add(ad::matmul(ad::relu(pre), c.at("l1.w")), c.at("l1.b"));
    };
    return {head(ad::add(a, b)), head(ad::add(a, ad::gather_rows(b, perm)))};
  }
  ad::Var ex = tower_forward(g, c, 'x', x);
  ad::Var ey = tower_forward(g, c, 'y', y);
  return {ad::rowwise_dot(ex, ey), ad::rowwise_dot(ex, ad::gather_rows(ey, perm))};
}

ad::Var score_matrix(ad::Graph& g, const BoundCritic& c, const Matrix& x,
                     const Matrix& y) {
  check_inputs(c.descriptor, x, y, false);
  if (c.descriptor.design == CriticDesign::Concatenate) {
    ad::Var a = ad::matmul(g.constant(x), c.at("l0.wx"));
    ad::Var b = ad::matmul(g.constant(y), c.at("l0.wy"));
    return ad::add(ad::pairwise_relu_head(a, b, c.at("l0.b"), c.at("l1.w")),
                   c.at("l1.b"));
  }
  return ad::matmul(tower_forward(g, c, 'x', x),
                    ad::transpose(tower_forward(g, c, 'y', y)));
}

Matrix evaluate_pair_scores(const CriticParams& params, const Matrix& x,
                            const Matrix& y) {
  ad::Graph g;
  auto c = bind_critic(g, params);
  return g.forward(pair_scores(g, c, x, y));
}

Matrix evaluate_score_matrix(const CriticParams& params, const Matrix& x,
                             const Matrix& y) {
  ad::Graph g;
  auto c = bind_critic(g, params);
  return g.forward(score_matrix(g, c, x, y));
}

Matrix embed(const CriticParams& params, char tower, const Matrix& input) {
  ad::Graph g;
  auto c = bind_critic(g, params);
  return g.forward(tower_forward(g, c, tower, input));
}

double min_abs_preactivation(const CriticParams& params, const Matrix& x,
                             const Matrix& y) {
  const auto& w = params.weights;
  double best = std::numeric_limits<double>::infinity();
  if (params.descriptor.design == CriticDesign::Concatenate) {
    check_inputs(params.descriptor, x, y, false);
    Matrix a = (x * w.at("l0.wx")).rowwise() + w.at("l0.b").row(0);
    Matrix b = y * w.at("l0.wy");
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < b.rows(); ++j)
        best = std::min(best, (a.row(i) + b.row(j)).cwiseAbs().minCoeff());
    return best;
  }
  for (auto [tower, in] : {std::pair<char, const Matrix*>{'x', &x}, {'y', &y}}) {
    std::string p(1, tower);
    Matrix pre = ((*in) * w.at(p + ".l0.w")).rowwise() + w.at(p + ".l0.b").row(0);
    if (pre.size() > 0) best = std::min(best, pre.cwiseAbs().minCoeff());
  }
  return best;
}

void save_checkpoint(std::ostream& out, const CriticParams& params) {
  validate(params);
  const auto& d = params.descriptor;
  out << "pointdep-critic 1\n"
      << "design " << to_string(d.design) << "\n"
      << "x_dim " << d.x_dim << "\n"
      << "y_dim " << d.y_dim << "\n"
      << "hidden " << d.hidden << "\n"
      << "embed " << d.embed << "\n"
      << "seed " << params.seed << "\n"
      << "tensors " << params.weights.size() << "\n";
  for (const auto& [name, m] : params.weights) {
    out << "tensor " << name << " " << m.rows() << " " << m.cols() << "\n";
    // Row-major, one row per line.
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        out << (c ? " " : "") << fmt_double(m(r, c));
      out << "\n";
    }
  }
  if (!out) throw StructuralError("checkpoint: write failed");
}

CriticParams load_checkpoint(std::istream& in) {
  auto expect_key = [&](const std::string& key) {
    std::string k;
    if (!(in >> k) || k != key)
      throw StructuralError("checkpoint: expected '" + key + "'");
  };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "pointdep-critic" || version != 1)
    throw StructuralError("checkpoint: not a version-1 pointdep critic file");

  CriticParams p;
  std::string design;
  expect_key("design");
  in >> design;
  p.descriptor.design = parse_design(design);
  expect_key("x_dim");
  in >> p.descriptor.x_dim;
  expect_key("y_dim");
  in >> p.descriptor.y_dim;
  expect_key("hidden");
  in >> p.descriptor.hidden;
  expect_key("embed");
  in >> p.descriptor.embed;
  expect_key("seed");
  in >> p.seed;
  std::size_t count = 0;
  expect_key("tensors");
  in >> count;
  if (!in) throw StructuralError("checkpoint: truncated header");

  for (std::size_t t = 0; t < count; ++t) {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    expect_key("tensor");
    if (!(in >> name >> rows >> cols) || rows < 0 || cols < 0)
      throw StructuralError("checkpoint: bad tensor header");
    Matrix m(rows, cols);
    std::string tok;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(in >> tok)) throw StructuralError("checkpoint: truncated tensor '" + name + "'");
        m(r, c) = parse_double(tok);
      }
    p.weights.emplace(name, std::move(m));
  }
  validate(p);
  return p;
}

}  // namespace pointdep
