#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pointdep/autodiff.hpp"

namespace pointdep {

using ad::Matrix;

enum class CriticDesign {
  Concatenate,  // g([x, y]) -> scalar
  Separate,     // g_x(x)^T g_y(y)
  EncoderPair,  // F(v1)^T G(v2); F is reused as the representation
};

std::string_view to_string(CriticDesign design);
CriticDesign parse_design(std::string_view name);

// One hidden ReLU layer per tower.
struct CriticDescriptor {
  CriticDesign design = CriticDesign::Concatenate;
  int x_dim = 0;
  int y_dim = 0;
  int hidden = 512;
  int embed = 128;  // tower output width; unused by Concatenate

  bool operator==(const CriticDescriptor&) const = default;
};

CriticDescriptor mi_benchmark_descriptor(int x_dim, int y_dim);
CriticDescriptor retrieval_descriptor(int x_dim, int y_dim);
CriticDescriptor encoder_pair_descriptor(int input_dim, int hidden = 128,
                                         int embed = 32);

struct CriticParams {
  CriticDescriptor descriptor;
  std::uint64_t seed = 0;
  ad::ParamSet weights;
};

// Glorot-uniform weights, zero biases. Deterministic in `seed`.
CriticParams init_params(const CriticDescriptor& descriptor, std::uint64_t seed);

// Throws StructuralError if weight shapes do not chain per the descriptor.
void validate(const CriticParams& params);

// Critic parameters bound as leaves of a graph.
struct BoundCritic {
  CriticDescriptor descriptor;
  std::map<std::string, ad::Var> vars;

  ad::Var at(const std::string& name) const;
};

BoundCritic bind_critic(ad::Graph& graph, const CriticParams& params);

// n x 1 scores for aligned pairs (x_i, y_i).
ad::Var concat_critic_forward(ad::Graph& graph, const BoundCritic& critic,
                              const Matrix& x, const Matrix& y);
ad::Var separate_critic_forward(ad::Graph& graph, const BoundCritic& critic,
                                const Matrix& x, const Matrix& y);
// Dispatches on the descriptor's design.
ad::Var pair_scores(ad::Graph& graph, const BoundCritic& critic,
                    const Matrix& x, const Matrix& y);

struct JointProductScores {
  ad::Var joint;    // scores of (x_i, y_i)
  ad::Var product;  // scores of (x_i, y_perm[i])
};

// Both score sets from one pass over the inputs: the per-row projections of
// x and y are computed once and the product side reuses them through a row
// gather.
JointProductScores joint_and_product_scores(ad::Graph& graph,
                                            const BoundCritic& critic,
                                            const Matrix& x, const Matrix& y,
                                            const std::vector<int>& perm);

// n x m matrix of scores for every (x_i, y_j).
ad::Var score_matrix(ad::Graph& graph, const BoundCritic& critic,
                     const Matrix& x, const Matrix& y);

// Tower outputs for the two-tower designs. `tower` is 'x' or 'y'.
ad::Var tower_forward(ad::Graph& graph, const BoundCritic& critic, char tower,
                      const Matrix& input);

// Graph-free conveniences.
Matrix evaluate_pair_scores(const CriticParams& params, const Matrix& x,
                            const Matrix& y);
Matrix evaluate_score_matrix(const CriticParams& params, const Matrix& x,
                             const Matrix& y);
Matrix embed(const CriticParams& params, char tower, const Matrix& input);

// Smallest |pre-activation| over every hidden unit and every (x_i, y_j)
// pairing. Finite-difference checks need this bounded away from zero.
double min_abs_preactivation(const CriticParams& params, const Matrix& x,
                             const Matrix& y);

// Plain-text checkpoint. Values are written in shortest round-trip form, so
// load(save(p)) reproduces p bit for bit.
void save_checkpoint(std::ostream& out, const CriticParams& params);
CriticParams load_checkpoint(std::istream& in);

}  // namespace pointdep
