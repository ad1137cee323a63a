#pragma once

// End-to-end harnesses: the MI staircase benchmark, the toy two-view
// contrastive experiment with a linear probe, and cross-modal retrieval with
// PMI-based dataset debugging.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pointdep/critics.hpp"
#include "pointdep/datagen.hpp"
#include "pointdep/estimators.hpp"
#include "pointdep/objectives.hpp"

namespace pointdep {

// ---------------------------------------------------------------------------
// Shared training loop

struct PairTrainConfig {
  ObjectiveSpec objective;
  int batch_size = 128;
  int epochs = 1;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

// Minibatch training over a fixed set of aligned pairs. Joint samples are
// the aligned rows of each batch; product samples pair the same x rows with
// an in-batch permutation of y. CPC uses the batch score matrix instead.
// Trailing batches smaller than two pairs are skipped.
void train_pair_critic(CriticParams& critic, const Matrix& x, const Matrix& y,
                       const PairTrainConfig& config);

// Runs `work(i)` for i in [0, n) on up to `jobs` threads. Exceptions are
// rethrown on the caller's thread (lowest index first).
void parallel_for(int n, int jobs, const std::function<void(int)>& work);

// ---------------------------------------------------------------------------
// MI staircase benchmark

enum class TaskKind { Gaussian, Cubic, Discrete };

std::string_view to_string(TaskKind task);
TaskKind parse_task(std::string_view name);

struct BenchmarkConfig {
  TaskKind task = TaskKind::Gaussian;
  int dim = 6;
  int batch_size = 128;
  int iterations = 20000;
  int step_length = 4000;
  double mi_start = 2.0;
  double mi_increment = 2.0;
  std::vector<std::string> estimators = estimator_names();
  double learning_rate = 1e-3;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  int window = 500;
  std::string table = "demo8x8";  // Discrete task only
  int hidden = 512;
  double clip = kDefaultClip;
  double lambda = 1.0;
  double eta = 1.0;
  int jobs = 1;

  // StructuralError on any inconsistency, including unknown estimators.
  void validate() const;
};

struct TrainRecord {
  std::string estimator;
  std::uint64_t seed = 0;
  int iteration = 0;
  double estimate = 0.0;
  double true_mi = 0.0;
};

struct TrainReport {
  TaskKind task = TaskKind::Gaussian;
  int step_length = 0;
  int window = 0;
  std::vector<TrainRecord> records;  // ordered by (estimator, seed, iteration)
};

struct SummaryRow {
  std::string estimator;
  double step_mi = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double std = 0.0;  // population std of the pooled window values
  int n_seeds = 0;
};

// Ground-truth MI at an iteration under the config's schedule.
double scheduled_mi(const BenchmarkConfig& config, int iteration);

TrainReport run_staircase(const BenchmarkConfig& config);

// Estimates from the last `window` iterations of every step, pooled across
// seeds. Rows ordered by estimator (first appearance), then step.
std::vector<SummaryRow> summarize_bias_variance(const TrainReport& report);

// ---------------------------------------------------------------------------
// Toy self-supervised experiment

enum class ContrastiveObjective { CPC, PCC, DRFC };

std::string_view to_string(ContrastiveObjective objective);
ContrastiveObjective parse_contrastive(std::string_view name);

struct SelfSupConfig {
  int classes = 4;
  int input_dim = 64;
  int train_samples = 8000;
  int test_samples = 2000;
  double noise = 3.0;
  int hidden = 128;
  int embed = 32;
  int batch_size = 128;
  int epochs = 10;
  double learning_rate = 1e-3;
  int probe_steps = 1000;
  double probe_learning_rate = 0.5;
};

// Multinomial logistic regression trained by full-batch gradient descent on
// standardised features; returns test accuracy.
double linear_probe_accuracy(const Matrix& train_features,
                             const std::vector<int>& train_labels,
                             const Matrix& test_features,
                             const std::vector<int>& test_labels, int classes,
                             int steps, double learning_rate);

double run_selfsup_toy(ContrastiveObjective objective,
                       const SelfSupConfig& config, std::uint64_t seed);
// Same data and encoder initialisation, no contrastive training.
double run_random_encoder_baseline(const SelfSupConfig& config,
                                   std::uint64_t seed);

// ---------------------------------------------------------------------------
// Cross-modal retrieval and dataset debugging

struct PairSet {
  Matrix x;
  Matrix y;
  std::vector<std::string> ids;

  int size() const { return static_cast<int>(x.rows()); }
};

PairSet select_pairs(const Matrix& x, const Matrix& y,
                     const std::vector<std::string>& ids,
                     const std::vector<int>& rows);

enum class RetrievalObjective { PC, DRF };

std::string_view to_string(RetrievalObjective objective);
RetrievalObjective parse_retrieval_objective(std::string_view name);

struct RetrievalConfig {
  RetrievalObjective objective = RetrievalObjective::PC;
  int candidates = 5;
  int hidden = 512;
  int embed = 128;
  int batch_size = 512;
  int epochs = 100;  // 0 leaves the critic at its initialisation
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct RankedCandidate {
  int candidate_id = 0;  // row in the test set
  double pmi = 0.0;
  bool is_true = false;
};

struct RankedQuery {
  int query_id = 0;
  std::vector<RankedCandidate> ranking;  // best first
};

struct RetrievalResult {
  double top1 = 0.0;
  std::vector<RankedQuery> queries;
};

// PMI of each (x_i, y_j) under a trained critic, per the objective's rule.
Matrix pmi_matrix(const CriticParams& critic, RetrievalObjective objective,
                  const Matrix& x, const Matrix& y);
CriticParams train_retrieval_critic(const PairSet& train,
                                    const RetrievalConfig& config);
// Ranks the true partner against candidates-1 distractors drawn without
// replacement from the other test items (per-query seed).
RetrievalResult rank_candidates(const Matrix& pmi, int candidates,
                                std::uint64_t seed);
RetrievalResult run_retrieval(const PairSet& train, const PairSet& test,
                              const RetrievalConfig& config);

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  int count = 0;
};

struct FlaggedItem {
  int index = 0;
  std::string id;
  double pmi = 0.0;
};

struct DebugResult {
  std::vector<double> pmi;
  std::vector<HistogramBin> histogram;
  std::vector<FlaggedItem> flagged;  // PMI < 0, ascending by PMI
  double plugin_mi = 0.0;
};

// Bins aligned to multiples of `bin_width`, covering [min, max].
std::vector<HistogramBin> pmi_histogram(const std::vector<double>& values,
                                        double bin_width);

// folds == 1 scores every pair with one critic trained on all of them;
// folds > 1 cross-fits, scoring each fold with a critic trained on the rest.
DebugResult run_dataset_debugging(const PairSet& train,
                                  const RetrievalConfig& config,
                                  double bin_width = 0.5, int folds = 1);

// Replaces y for round(fraction * n) randomly chosen pairs with the y of
// another chosen pair (a cyclic shift among them). Returns planted rows.
std::vector<int> plant_mismatches(PairSet& pairs, double fraction,
                                  std::uint64_t seed);

// ---------------------------------------------------------------------------
// CSV output (header row first, full-precision numbers)

void write_records_csv(std::ostream& out, const TrainReport& report);
void write_summary_csv(std::ostream& out, TaskKind task,
                       const std::vector<SummaryRow>& rows);
void write_retrieval_csv(std::ostream& out, const RetrievalResult& result);
void write_histogram_csv(std::ostream& out,
                         const std::vector<HistogramBin>& bins);
void write_flagged_csv(std::ostream& out, const std::vector<FlaggedItem>& items);

}  // namespace pointdep
