#pragma once

// Data sources with known dependence structure: correlated Gaussians with a
// closed-form MI, an exact finite joint distribution, and synthetic stand-ins
// for the two-view and cross-modal experiments.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pointdep/autodiff.hpp"

namespace pointdep {

using ad::Matrix;

struct GaussianTaskSpec {
  int dim = 20;  // per-variable dimension
  double rho = 0.0;
  bool cubic = false;
  std::uint64_t seed = 0;
};

// -(d/2) log(1 - rho^2). The cubic map on y leaves it unchanged.
double mi_gaussian(const GaussianTaskSpec& spec);
double rho_for_mi(double mi, int dim);

enum class BatchTag { Joint, Product };

class PairBatch {
 public:
  PairBatch(Matrix x, Matrix y, BatchTag tag, std::uint64_t seed);

  const Matrix& x() const { return x_; }
  const Matrix& y() const { return y_; }
  BatchTag tag() const { return tag_; }
  std::uint64_t seed() const { return seed_; }
  Eigen::Index size() const { return x_.rows(); }

 private:
  Matrix x_;
  Matrix y_;
  BatchTag tag_;
  std::uint64_t seed_;
};

// Per coordinate: x ~ N(0,1), y = rho x + sqrt(1 - rho^2) e; then y -> y^3
// when spec.cubic is set.
PairBatch sample_gaussian_pairs(const GaussianTaskSpec& spec, int n,
                                std::uint64_t seed);

// Uniform permutation of [0, n).
std::vector<int> random_permutation(int n, std::uint64_t seed);

// Keeps x, permutes the rows of y. Requires at least two pairs.
PairBatch make_product_batch(const PairBatch& joint, std::uint64_t seed);

class DiscreteJoint {
 public:
  // Entries must be nonnegative and sum to one within 1e-12.
  explicit DiscreteJoint(Matrix table);

  int rows() const { return static_cast<int>(table_.rows()); }
  int cols() const { return static_cast<int>(table_.cols()); }
  const Matrix& table() const { return table_; }
  const Eigen::VectorXd& px() const { return px_; }
  const Eigen::VectorXd& py() const { return py_; }
  // p_x p_y^T
  Matrix product_table() const;

  // Seeded table with Exp(1) entries, normalised.
  static DiscreteJoint random(int rows, int cols, std::uint64_t seed);
  // The fixed 8x8 benchmark table.
  static DiscreteJoint demo8x8();
  // Looks up a named table ("demo8x8"); StructuralError otherwise.
  static DiscreteJoint named(const std::string& name);

 private:
  Matrix table_;
  Eigen::VectorXd px_;
  Eigen::VectorXd py_;
};

// p(i,j) / (p_x(i) p_y(j)); NumericalError for a 0/0 cell.
double oracle_pd(const DiscreteJoint& joint, int i, int j);
Matrix oracle_pd_table(const DiscreteJoint& joint);
double oracle_mi(const DiscreteJoint& joint);

struct Expectations {
  double joint_mean = 0.0;         // E_P[f]
  double product_mean = 0.0;       // E_Q[f]
  double product_mean_exp = 0.0;   // E_Q[e^f]
  double product_mean_sq = 0.0;    // E_Q[f^2]
};

Expectations oracle_expectations(const DiscreteJoint& joint, const Matrix& f);

// Cells with positive probability under p and under p_x p_y, flattened
// row-major, with their weights. Feeds the exact-expectation objective forms.
struct FlatSupport {
  std::vector<double> joint_values, joint_weights;
  std::vector<double> product_values, product_weights;
};
FlatSupport flatten_for_expectation(const DiscreteJoint& joint, const Matrix& f);

// Inverse-CDF sampling. With one_hot, x is n x rows and y is n x cols;
// otherwise both are n x 1 holding the symbol index.
PairBatch sample_discrete_pairs(const DiscreteJoint& joint, int n,
                                std::uint64_t seed, bool one_hot);

struct TwoViewDataset {
  Matrix view1;
  Matrix view2;
  std::vector<int> labels;
  Matrix prototypes;  // classes x input_dim
  int classes = 0;
};

// Latent class c uniform over `classes`; both views are mu_c plus
// independent N(0, noise^2) per coordinate. Prototypes depend only on
// `seed`, not on `samples`.
TwoViewDataset make_twoview_dataset(int classes, int samples, double noise,
                                    std::uint64_t seed, int input_dim = 64);

struct CrossModalDataset {
  std::vector<std::string> tokens;
  Matrix audio;
  Matrix text;
  std::vector<int> train;
  std::vector<int> test;
};

// Shared latent z_w ~ N(0, I) per word. Each modality is a fixed random
// orthogonal map applied to alpha z_w + (1 - alpha) e with modality-specific
// noise e, so alpha = 1 is a deterministic relation and alpha = 0 makes the
// modalities independent.
CrossModalDataset make_crossmodal_dataset(int words, int dim, double alpha,
                                          std::uint64_t seed,
                                          double train_fraction = 0.9);

struct WordVectors {
  std::vector<std::string> tokens;
  Matrix vectors;
};

// Lines: token followed by d floats. A leading "<count> <dim>" header line is
// accepted. Blank lines are skipped; any other arity mismatch is a
// StructuralError carrying the line number.
WordVectors read_word_vectors(std::istream& in, const std::string& source);
WordVectors read_word_vectors_file(const std::string& path);

struct AlignedVectors {
  std::vector<std::string> tokens;
  Matrix first;
  Matrix second;
};

// Intersection must be the full token set of both inputs; otherwise throws
// StructuralError listing up to ten missing tokens. Order follows `first`.
AlignedVectors align_by_token(const WordVectors& first, const WordVectors& second);

}  // namespace pointdep
