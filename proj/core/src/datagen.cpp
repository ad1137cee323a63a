#include "pointdep/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "pointdep/error.hpp"
#include "pointdep/rng.hpp"

namespace pointdep {

double mi_gaussian(const GaussianTaskSpec& spec) {
  if (!(std::abs(spec.rho) < 1.0))
    throw StructuralError("mi_gaussian: |rho| must be < 1");
  return -0.5 * spec.dim * std::log1p(-spec.rho * spec.rho);
}

double rho_for_mi(double mi, int dim) {
  if (dim <= 0) throw StructuralError("rho_for_mi: dim must be positive");
  if (mi < 0.0) throw StructuralError("rho_for_mi: MI must be nonnegative");
  return std::sqrt(-std::expm1(-2.0 * mi / dim));
}

PairBatch::PairBatch(Matrix x, Matrix y, BatchTag tag, std::uint64_t seed)
    : x_(std::move(x)), y_(std::move(y)), tag_(tag), seed_(seed) {
  if (x_.rows() != y_.rows())
    throw StructuralError("PairBatch: x and y have different lengths");
}

PairBatch sample_gaussian_pairs(const GaussianTaskSpec& spec, int n,
                                std::uint64_t seed) {
  if (!(std::abs(spec.rho) < 1.0))
    throw StructuralError("sample_gaussian_pairs: |rho| must be < 1");
  if (spec.dim <= 0 || n < 0)
    throw StructuralError("sample_gaussian_pairs: bad dimensions");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const double noise = std::sqrt(1.0 - spec.rho * spec.rho);
  Matrix x(n, spec.dim), y(n, spec.dim);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < spec.dim; ++k) {
      const double xi = normal(rng);
      const double e = normal(rng);
      const double yi = spec.rho * xi + noise * e;
      x(i, k) = xi;
      y(i, k) = spec.cubic ? yi * yi * yi : yi;
    }
  }
  return PairBatch(std::move(x), std::move(y), BatchTag::Joint, seed);
}

std::vector<int> random_permutation(int n, std::uint64_t seed) {
  std::vector<int> perm(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

PairBatch make_product_batch(const PairBatch& joint, std::uint64_t seed) {
  if (joint.size() < 2)
    throw UsageError("make_product_batch: need at least two pairs");
  auto perm = random_permutation(static_cast<int>(joint.size()), seed);
  Matrix y(joint.y().rows(), joint.y().cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) y.row(i) = joint.y().row(perm[i]);
  return PairBatch(joint.x(), std::move(y), BatchTag::Product, seed);
}

// ---------------------------------------------------------------------------
// DiscreteJoint

DiscreteJoint::DiscreteJoint(Matrix table) : table_(std::move(table)) {
  if (table_.size() == 0) throw StructuralError("DiscreteJoint: empty table");
  if (!table_.allFinite() || table_.minCoeff() < 0.0)
    throw StructuralError("DiscreteJoint: entries must be finite and nonnegative");
  if (std::abs(table_.sum() - 1.0) > 1e-12)
    throw StructuralError("DiscreteJoint: table must sum to one");
  px_ = table_.rowwise().sum();
  py_ = table_.colwise().sum().transpose();
}

Matrix DiscreteJoint::product_table() const { return px_ * py_.transpose(); }

DiscreteJoint DiscreteJoint::random(int rows, int cols, std::uint64_t seed) {
  if (rows <= 0 || cols <= 0)
    throw StructuralError("DiscreteJoint::random: dims must be positive");
  Rng rng(seed);
  std::exponential_distribution<double> draw(1.0);
  Matrix t(rows, cols);
  for (Eigen::Index k = 0; k < t.size(); ++k) t(k) = draw(rng);
  t /= t.sum();
  return DiscreteJoint(std::move(t));
}

DiscreteJoint DiscreteJoint::demo8x8() {
  // Circular band exp(3.5 cos(2 pi (i - j) / 8)) with seeded jitter.
  constexpr int n = 8;
  Rng rng(derive_seed(2020, "demo8x8"));
  std::normal_distribution<double> jitter(0.0, 0.3);
  Matrix t(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      t(i, j) = std::exp(3.5 * std::cos(2.0 * std::numbers::pi * (i - j) / n) +
                         jitter(rng));
  t /= t.sum();
  return DiscreteJoint(std::move(t));
}

DiscreteJoint DiscreteJoint::named(const std::string& name) {
  if (name == "demo8x8") return demo8x8();
  throw StructuralError("unknown discrete table '" + name + "'; valid: demo8x8");
}

double oracle_pd(const DiscreteJoint& joint, int i, int j) {
  if (i < 0 || j < 0 || i >= joint.rows() || j >= joint.cols())
    throw StructuralError("oracle_pd: index out of range");
  const double denom = joint.px()(i) * joint.py()(j);
  const double num = joint.table()(i, j);
  if (denom == 0.0) {
    if (num == 0.0) throw NumericalError("oracle_pd: 0/0 cell");
    throw NumericalError("oracle_pd: zero marginal with positive joint mass");
  }
  return num / denom;
}

Matrix oracle_pd_table(const DiscreteJoint& joint) {
  Matrix r(joint.rows(), joint.cols());
  for (int i = 0; i < joint.rows(); ++i)
    for (int j = 0; j < joint.cols(); ++j) r(i, j) = oracle_pd(joint, i, j);
  return r;
}

double oracle_mi(const DiscreteJoint& joint) {
  double mi = 0.0;
  for (int i = 0; i < joint.rows(); ++i)
    for (int j = 0; j < joint.cols(); ++j) {
      const double p = joint.table()(i, j);
      if (p > 0.0) mi += p * std::log(oracle_pd(joint, i, j));
    }
  return mi;
}

Expectations oracle_expectations(const DiscreteJoint& joint, const Matrix& f) {
  if (f.rows() != joint.rows() || f.cols() != joint.cols())
    throw StructuralError("oracle_expectations: f table shape mismatch");
  Expectations e;
  const Matrix q = joint.product_table();
  for (int i = 0; i < joint.rows(); ++i)
    for (int j = 0; j < joint.cols(); ++j) {
      const double p = joint.table()(i, j);
      const double w = q(i, j);
      if (p > 0.0) e.joint_mean += p * f(i, j);
      if (w > 0.0) {
        e.product_mean += w * f(i, j);
        e.product_mean_exp += w * std::exp(f(i, j));
        e.product_mean_sq += w * f(i, j) * f(i, j);
      }
    }
  return e;
}

FlatSupport flatten_for_expectation(const DiscreteJoint& joint, const Matrix& f) {
  if (f.rows() != joint.rows() || f.cols() != joint.cols())
    throw StructuralError("flatten_for_expectation: f table shape mismatch");
  FlatSupport s;
  const Matrix q = joint.product_table();
  for (int i = 0; i < joint.rows(); ++i)
    for (int j = 0; j < joint.cols(); ++j) {
      if (joint.table()(i, j) > 0.0) {
        s.joint_values.push_back(f(i, j));
        s.joint_weights.push_back(joint.table()(i, j));
      }
      if (q(i, j) > 0.0) {
        s.product_values.push_back(f(i, j));
        s.product_weights.push_back(q(i, j));
      }
    }
  return s;
}

PairBatch sample_discrete_pairs(const DiscreteJoint& joint, int n,
                                std::uint64_t seed, bool one_hot) {
  if (n < 0) throw StructuralError("sample_discrete_pairs: negative n");
  const int cols = joint.cols();
  std::vector<double> cdf;
  cdf.reserve(static_cast<std::size_t>(joint.table().size()));
  double acc = 0.0;
  for (int i = 0; i < joint.rows(); ++i)
    for (int j = 0; j < cols; ++j) cdf.push_back(acc += joint.table()(i, j));

  Rng rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, acc);
  Matrix x = Matrix::Zero(n, one_hot ? joint.rows() : 1);
  Matrix y = Matrix::Zero(n, one_hot ? cols : 1);
  for (int s = 0; s < n; ++s) {
    const double u = uniform(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    int cell = static_cast<int>(std::min<std::ptrdiff_t>(
        it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
    // Skip trailing zero-mass cells that upper_bound may land past.
    while (joint.table()(cell / cols, cell % cols) == 0.0 && cell > 0) --cell;
    const int i = cell / cols;
    const int j = cell % cols;
    if (one_hot) {
      x(s, i) = 1.0;
      y(s, j) = 1.0;
    } else {
      x(s, 0) = i;
      y(s, 0) = j;
    }
  }
  return PairBatch(std::move(x), std::move(y), BatchTag::Joint, seed);
}

// ---------------------------------------------------------------------------
// Synthetic experiment data

TwoViewDataset make_twoview_dataset(int classes, int samples, double noise,
                                    std::uint64_t seed, int input_dim) {
  if (classes < 1 || samples < 0 || input_dim <= 0 || noise < 0.0)
    throw StructuralError("make_twoview_dataset: invalid configuration");
  TwoViewDataset d;
  d.classes = classes;
  d.prototypes.resize(classes, input_dim);
  {
    Rng rng = make_rng(seed, "twoview-prototypes");
    std::normal_distribution<double> normal;
    for (Eigen::Index k = 0; k < d.prototypes.size(); ++k)
      d.prototypes(k) = normal(rng);
  }
  Rng rng = make_rng(seed, "twoview-samples");
  std::uniform_int_distribution<int> pick(0, classes - 1);
  std::normal_distribution<double> normal;
  d.view1.resize(samples, input_dim);
  d.view2.resize(samples, input_dim);
  d.labels.resize(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    const int c = pick(rng);
    d.labels[s] = c;
    for (int k = 0; k < input_dim; ++k) {
      d.view1(s, k) = d.prototypes(c, k) + noise * normal(rng);
      d.view2(s, k) = d.prototypes(c, k) + noise * normal(rng);
    }
  }
  return d;
}

namespace {

Matrix random_orthogonal(int dim, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix g(dim, dim);
  for (Eigen::Index k = 0; k < g.size(); ++k) g(k) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  // Sign-fix so the result does not depend on the QR sign convention.
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < dim; ++k)
    if (r(k, k) < 0) q.col(k) *= -1.0;
  return q;
}

}  // namespace

CrossModalDataset make_crossmodal_dataset(int words, int dim, double alpha,
                                          std::uint64_t seed,
                                          double train_fraction) {
  if (words < 2 || dim <= 0 || alpha < 0.0 || alpha > 1.0 ||
      !(train_fraction > 0.0 && train_fraction < 1.0))
    throw StructuralError("make_crossmodal_dataset: invalid configuration");
  CrossModalDataset d;
  Rng maps = make_rng(seed, "crossmodal-maps");
  const Matrix qa = random_orthogonal(dim, maps);
  const Matrix qt = random_orthogonal(dim, maps);

  Rng rng = make_rng(seed, "crossmodal-samples");
  std::normal_distribution<double> normal;
  Matrix a(words, dim), t(words, dim);
  for (int w = 0; w < words; ++w) {
    for (int k = 0; k < dim; ++k) {
      const double z = normal(rng);
      a(w, k) = alpha * z + (1.0 - alpha) * normal(rng);
      t(w, k) = alpha * z + (1.0 - alpha) * normal(rng);
    }
    d.tokens.push_back("w" + std::to_string(w));
  }
  d.audio = a * qa.transpose();
  d.text = t * qt.transpose();

  auto perm = random_permutation(words, derive_seed(seed, "crossmodal-split"));
  const int n_train = std::clamp(static_cast<int>(std::lround(train_fraction * words)), 1, words - 1);
  d.train.assign(perm.begin(), perm.begin() + n_train);
  d.test.assign(perm.begin() + n_train, perm.end());
  std::sort(d.train.begin(), d.train.end());
  std::sort(d.test.begin(), d.test.end());
  return d;
}

// ---------------------------------------------------------------------------
// Word vectors

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

bool is_integer(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return c >= '0' && c <= '9';
  });
}

}  // namespace

WordVectors read_word_vectors(std::istream& in, const std::string& source) {
  WordVectors wv;
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  long dim = -1;
  bool first_record = true;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (first_record && fields.size() == 2 && is_integer(fields[0]) &&
        is_integer(fields[1])) {
      dim = std::stol(fields[1]);
      first_record = false;
      continue;
    }
    first_record = false;
    const long arity = static_cast<long>(fields.size()) - 1;
    if (dim < 0) dim = arity;
    if (arity != dim || dim == 0) {
      std::ostringstream os;
      os << source << ":" << line_no << ": expected token followed by " << dim
         << " values, got " << arity;
      throw StructuralError(os.str());
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(dim));
    for (long k = 1; k <= dim; ++k) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(fields[k], &used));
        if (used != fields[k].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        std::ostringstream os;
        os << source << ":" << line_no << ": bad number '" << fields[k] << "'";
        throw StructuralError(os.str());
      }
    }
    wv.tokens.push_back(fields[0]);
    rows.push_back(std::move(values));
  }
  wv.vectors.resize(static_cast<Eigen::Index>(rows.size()), std::max(dim, 0L));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (long k = 0; k < dim; ++k) wv.vectors(r, k) = rows[r][k];
  return wv;
}

WordVectors read_word_vectors_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_word_vectors(in, path);
}

AlignedVectors align_by_token(const WordVectors& first, const WordVectors& second) {
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < second.tokens.size(); ++i)
    index.emplace(second.tokens[i], static_cast<int>(i));
  std::set<std::string> in_first(first.tokens.begin(), first.tokens.end());

  std::vector<std::string> missing;
  for (const auto& t : first.tokens)
    if (!index.count(t)) missing.push_back(t);
  for (const auto& t : second.tokens)
    if (!in_first.count(t)) missing.push_back(t);
  if (!missing.empty()) {
    std::ostringstream os;
    os << "token sets differ (" << missing.size() << " unmatched); first missing:";
    for (std::size_t k = 0; k < std::min<std::size_t>(10, missing.size()); ++k)
      os << " " << missing[k];
    throw StructuralError(os.str());
  }

  AlignedVectors out;
  out.tokens = first.tokens;
  out.first = first.vectors;
  out.second.resize(first.vectors.rows(), second.vectors.cols());
  for (std::size_t i = 0; i < first.tokens.size(); ++i)
    out.second.row(static_cast<Eigen::Index>(i)) =
        second.vectors.row(index.at(first.tokens[i]));
  return out;
}

}  // namespace pointdep
