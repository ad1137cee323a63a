#include "pointdep/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <thread>

#include "pointdep/adam.hpp"
#include "pointdep/error.hpp"
#include "pointdep/format.hpp"
#include "pointdep/rng.hpp"

namespace pointdep {

namespace {

struct StepValues {
  Matrix joint;
  Matrix product;
  Matrix matrix;  // CPC only
  double loss = 0.0;
};

// One optimisation step on a batch of aligned pairs.
StepValues training_step(CriticParams& critic, ad::AdamState& adam,
                         const ObjectiveSpec& objective, const Matrix& x,
                         const Matrix& y, std::uint64_t product_seed) {
  ad::Graph g;
  BoundCritic c = bind_critic(g, critic);
  StepValues out;
  ad::Var loss;
  if (objective.kind == ObjectiveKind::CPC) {
    ad::Var s = score_matrix(g, c, x, y);
    loss = loss_cpc(s);
    out.loss = g.evaluate(loss);
    out.matrix = g.value(s);
  } else {
    auto perm = random_permutation(static_cast<int>(x.rows()), product_seed);
    auto scores = joint_and_product_scores(g, c, x, y, perm);
    loss = pair_loss(objective, {scores.joint, {}}, {scores.product, {}});
    out.loss = g.evaluate(loss);
    out.joint = g.value(scores.joint);
    out.product = g.value(scores.product);
  }
  ad::adam_step(critic.weights, g.backward(loss), adam);
  return out;
}

Matrix gather(const Matrix& m, const std::vector<int>& rows, int begin, int end) {
  Matrix out(end - begin, m.cols());
  for (int i = begin; i < end; ++i) out.row(i - begin) = m.row(rows[i]);
  return out;
}

std::span<const double> as_span(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

}  // namespace

void train_pair_critic(CriticParams& critic, const Matrix& x, const Matrix& y,
                       const PairTrainConfig& config) {
  if (x.rows() != y.rows())
    throw StructuralError("train_pair_critic: x and y differ in length");
  if (config.batch_size < 2 || config.epochs < 0)
    throw StructuralError("train_pair_critic: invalid batch size or epochs");
  config.objective.validate();
  ad::AdamState adam(ad::AdamConfig{config.learning_rate});
  const int n = static_cast<int>(x.rows());
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto order = random_permutation(n, derive_seed(config.seed, "epoch", epoch));
    for (int begin = 0; begin < n; begin += config.batch_size) {
      const int end = std::min(n, begin + config.batch_size);
      if (end - begin < 2) continue;
      training_step(critic, adam, config.objective, gather(x, order, begin, end),
                    gather(y, order, begin, end),
                    derive_seed(config.seed, "product", step++));
    }
  }
}

void parallel_for(int n, int jobs, const std::function<void(int)>& work) {
  if (n <= 0) return;
  jobs = std::clamp(jobs, 1, n);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) {
      try {
        work(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) {
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) {
          try {
            work(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Staircase

std::string_view to_string(TaskKind task) {
  switch (task) {
    case TaskKind::Gaussian: return "gaussian";
    case TaskKind::Cubic: return "cubic";
    case TaskKind::Discrete: return "discrete";
  }
  return "unknown";
}

TaskKind parse_task(std::string_view name) {
  if (name == "gaussian") return TaskKind::Gaussian;
  if (name == "cubic") return TaskKind::Cubic;
  if (name == "discrete") return TaskKind::Discrete;
  throw StructuralError("unknown task '" + std::string(name) +
                        "'; valid: gaussian cubic discrete");
}

void BenchmarkConfig::validate() const {
  if (batch_size < 2) throw StructuralError("bench: batch size must be >= 2");
  if (iterations <= 0 || step_length <= 0)
    throw StructuralError("bench: iterations and step length must be positive");
  if (iterations % step_length != 0)
    throw StructuralError("bench: iterations must be divisible by step length");
  if (window <= 0 || window > step_length)
    throw StructuralError("bench: window must be in [1, step length]");
  if (dim <= 0 || hidden <= 0) throw StructuralError("bench: dims must be positive");
  if (!(learning_rate > 0.0)) throw StructuralError("bench: learning rate must be positive");
  if (!(clip > 0.0)) throw StructuralError("bench: clip must be positive");
  if (!(eta > 0.0)) throw StructuralError("bench: eta must be positive");
  if (jobs < 1) throw StructuralError("bench: jobs must be >= 1");
  if (estimators.empty()) throw StructuralError("bench: no estimators selected");
  if (seeds.empty()) throw StructuralError("bench: no seeds selected");
  for (const auto& e : estimators) find_estimator(e);
  if (task == TaskKind::Discrete) {
    DiscreteJoint::named(table);
  } else {
    const double last = mi_start + (iterations / step_length - 1) * mi_increment;
    if (mi_start < 0.0 || last < 0.0)
      throw StructuralError("bench: MI schedule must stay nonnegative");
  }
}

double scheduled_mi(const BenchmarkConfig& config, int iteration) {
  if (config.task == TaskKind::Discrete)
    return oracle_mi(DiscreteJoint::named(config.table));
  return config.mi_start + (iteration / config.step_length) * config.mi_increment;
}

namespace {

std::vector<TrainRecord> run_cell(const BenchmarkConfig& cfg,
                                  const EstimatorSpec& base, std::uint64_t seed) {
  EstimatorSpec spec = base;
  spec.clip = cfg.clip;
  ObjectiveSpec objective = spec.objective();
  objective.lambda = cfg.lambda;
  objective.eta = cfg.eta;

  std::optional<DiscreteJoint> table;
  int dx = cfg.dim, dy = cfg.dim;
  double discrete_mi = 0.0;
  if (cfg.task == TaskKind::Discrete) {
    table.emplace(DiscreteJoint::named(cfg.table));
    dx = table->rows();
    dy = table->cols();
    discrete_mi = oracle_mi(*table);
  }
  CriticDescriptor d = mi_benchmark_descriptor(dx, dy);
  d.hidden = cfg.hidden;
  // Same initialisation and data stream for every estimator at a given seed.
  CriticParams critic = init_params(d, derive_seed(seed, "critic"));
  ad::AdamState adam(ad::AdamConfig{cfg.learning_rate});

  std::vector<TrainRecord> out;
  out.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int t = 0; t < cfg.iterations; ++t) {
    const std::uint64_t batch_seed = derive_seed(seed, "batch", t);
    double truth;
    std::optional<PairBatch> batch;
    if (table) {
      truth = discrete_mi;
      batch.emplace(sample_discrete_pairs(*table, cfg.batch_size, batch_seed, true));
    } else {
      truth = scheduled_mi(cfg, t);
      GaussianTaskSpec g{cfg.dim, rho_for_mi(truth, cfg.dim),
                         cfg.task == TaskKind::Cubic, batch_seed};
      batch.emplace(sample_gaussian_pairs(g, cfg.batch_size, batch_seed));
    }
    StepValues v = training_step(critic, adam, objective, batch->x(), batch->y(),
                                 derive_seed(seed, "product", t));
    InferenceInput in{as_span(v.joint), as_span(v.product),
                      spec.uses_score_matrix() ? &v.matrix : nullptr, 1.0};
    out.push_back({spec.name, seed, t, infer(spec, in), truth});
  }
  return out;
}

}  // namespace

TrainReport run_staircase(const BenchmarkConfig& config) {
  config.validate();
  struct Cell {
    const EstimatorSpec* spec;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& name : config.estimators)
    for (auto seed : config.seeds) cells.push_back({&find_estimator(name), seed});

  std::vector<std::vector<TrainRecord>> results(cells.size());
  parallel_for(static_cast<int>(cells.size()), config.jobs, [&](int i) {
    results[i] = run_cell(config, *cells[i].spec, cells[i].seed);
  });

  TrainReport report;
  report.task = config.task;
  report.step_length = config.step_length;
  report.window = config.window;
  for (auto& r : results)
    report.records.insert(report.records.end(), r.begin(), r.end());
  return report;
}

std::vector<SummaryRow> summarize_bias_variance(const TrainReport& report) {
  if (report.step_length <= 0 || report.window <= 0 ||
      report.window > report.step_length)
    throw StructuralError("summarize: invalid step length or window");
  std::vector<std::string> order;
  struct Acc {
    std::vector<double> values;
    std::set<std::uint64_t> seeds;
    double truth = 0.0;
  };
  std::map<std::pair<std::string, int>, Acc> groups;
  for (const auto& r : report.records) {
    if (std::find(order.begin(), order.end(), r.estimator) == order.end())
      order.push_back(r.estimator);
    const int step = r.iteration / report.step_length;
    const int window_start = (step + 1) * report.step_length - report.window;
    if (r.iteration < window_start) continue;
    Acc& a = groups[{r.estimator, step}];
    a.values.push_back(r.estimate);
    a.seeds.insert(r.seed);
    a.truth = r.true_mi;
  }
  std::vector<SummaryRow> rows;
  for (const auto& name : order) {
    for (auto it = groups.lower_bound({name, 0});
         it != groups.end() && it->first.first == name; ++it) {
      const auto& v = it->second.values;
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      var /= static_cast<double>(v.size());
      rows.push_back({name, it->second.truth, mean, mean - it->second.truth,
                      std::sqrt(var), static_cast<int>(it->second.seeds.size())});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Self-supervised toy

std::string_view to_string(ContrastiveObjective objective) {
  switch (objective) {
    case ContrastiveObjective::CPC: return "cpc";
    case ContrastiveObjective::PCC: return "pcc";
    case ContrastiveObjective::DRFC: return "drfc";
  }
  return "unknown";
}

ContrastiveObjective parse_contrastive(std::string_view name) {
  if (name == "cpc") return ContrastiveObjective::CPC;
  if (name == "pcc") return ContrastiveObjective::PCC;
  if (name == "drfc") return ContrastiveObjective::DRFC;
  throw StructuralError("unknown contrastive objective '" + std::string(name) +
                        "'; valid: cpc pcc drfc");
}

double linear_probe_accuracy(const Matrix& train_features,
                             const std::vector<int>& train_labels,
                             const Matrix& test_features,
                             const std::vector<int>& test_labels, int classes,
                             int steps, double learning_rate) {
  if (train_features.rows() != static_cast<Eigen::Index>(train_labels.size()) ||
      test_features.rows() != static_cast<Eigen::Index>(test_labels.size()) ||
      train_features.cols() != test_features.cols())
    throw StructuralError("linear probe: feature/label shape mismatch");
  if (classes < 2 || train_labels.empty() || test_labels.empty())
    throw StructuralError("linear probe: need two classes and nonempty splits");

  Eigen::RowVectorXd mu = train_features.colwise().mean();
  Eigen::RowVectorXd sd =
      ((train_features.rowwise() - mu).cwiseAbs2().colwise().mean()).cwiseSqrt();
  for (Eigen::Index k = 0; k < sd.size(); ++k)
    if (!(sd(k) > 1e-12)) sd(k) = 1.0;
  auto standardise = [&](const Matrix& f) -> Matrix {
    return (f.rowwise() - mu).array().rowwise() / sd.array();
  };
  const Matrix xtr = standardise(train_features);
  const Matrix xte = standardise(test_features);

  const Eigen::Index n = xtr.rows();
  Matrix onehot = Matrix::Zero(n, classes);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, train_labels[i]) = 1.0;

  Matrix w = Matrix::Zero(xtr.cols(), classes);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(classes);
  for (int s = 0; s < steps; ++s) {
    Matrix logits = (xtr * w).rowwise() + b;
    Eigen::VectorXd m = logits.rowwise().maxCoeff();
    Matrix p = (logits.colwise() - m).array().exp();
    p.array().colwise() /= p.rowwise().sum().array();
    Matrix g = (p - onehot) / static_cast<double>(n);
    w.noalias() -= learning_rate * xtr.transpose() * g;
    b -= learning_rate * g.colwise().sum();
  }

  Matrix logits = (xte * w).rowwise() + b;
  int correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    if (arg == test_labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

namespace {

struct SelfSupSplit {
  Matrix v1_train, v2_train, v1_test;
  std::vector<int> y_train, y_test;
};

SelfSupSplit make_selfsup_split(const SelfSupConfig& cfg, std::uint64_t seed) {
  if (cfg.classes < 2)
    throw StructuralError("selfsup: degenerate dataset (fewer than two classes)");
  if (cfg.train_samples < 2 || cfg.test_samples < 1)
    throw StructuralError("selfsup: invalid split sizes");
  auto data = make_twoview_dataset(cfg.classes, cfg.train_samples + cfg.test_samples,
                                   cfg.noise, seed, cfg.input_dim);
  SelfSupSplit s;
  s.v1_train = data.view1.topRows(cfg.train_samples);
  s.v2_train = data.view2.topRows(cfg.train_samples);
  s.v1_test = data.view1.bottomRows(cfg.test_samples);
  s.y_train.assign(data.labels.begin(), data.labels.begin() + cfg.train_samples);
  s.y_test.assign(data.labels.begin() + cfg.train_samples, data.labels.end());
  std::set<int> present(s.y_train.begin(), s.y_train.end());
  if (present.size() < 2)
    throw StructuralError("selfsup: degenerate dataset (one class in training split)");
  // Standardise every feature with statistics pooled over both training
  // views. Score-valued objectives such as D-RFC are sensitive to the raw
  // input scale; the classifier-style ones are not.
  const Eigen::Index n = s.v1_train.rows();
  Eigen::RowVectorXd mean = (s.v1_train.colwise().sum() + s.v2_train.colwise().sum()) / (2.0 * n);
  Eigen::RowVectorXd var = ((s.v1_train.rowwise() - mean).array().square().colwise().sum() +
                            (s.v2_train.rowwise() - mean).array().square().colwise().sum()) /
                           (2.0 * n);
  Eigen::RowVectorXd inv = (var.array() > 0.0).select(var.array().rsqrt(), 1.0);
  for (Matrix* m : {&s.v1_train, &s.v2_train, &s.v1_test})
    *m = ((m->rowwise() - mean).array().rowwise() * inv.array()).matrix();
  return s;
}

double probe(const CriticParams& encoder, const SelfSupSplit& s,
             const SelfSupConfig& cfg) {
  return linear_probe_accuracy(embed(encoder, 'x', s.v1_train), s.y_train,
                               embed(encoder, 'x', s.v1_test), s.y_test,
                               cfg.classes, cfg.probe_steps,
                               cfg.probe_learning_rate);
}

CriticParams fresh_encoder(const SelfSupConfig& cfg, std::uint64_t seed) {
  return init_params(encoder_pair_descriptor(cfg.input_dim, cfg.hidden, cfg.embed),
                     derive_seed(seed, "encoder"));
}

}  // namespace

double run_selfsup_toy(ContrastiveObjective objective, const SelfSupConfig& cfg,
                       std::uint64_t seed) {
  SelfSupSplit s = make_selfsup_split(cfg, seed);
  CriticParams encoder = fresh_encoder(cfg, seed);
  ObjectiveKind kind = ObjectiveKind::CPC;
  if (objective == ContrastiveObjective::PCC) kind = ObjectiveKind::PC;
  if (objective == ContrastiveObjective::DRFC) kind = ObjectiveKind::DRF;
  train_pair_critic(encoder, s.v1_train, s.v2_train,
                    {ObjectiveSpec{kind}, cfg.batch_size, cfg.epochs,
                     cfg.learning_rate, derive_seed(seed, "selfsup-train")});
  return probe(encoder, s, cfg);
}

double run_random_encoder_baseline(const SelfSupConfig& cfg, std::uint64_t seed) {
  SelfSupSplit s = make_selfsup_split(cfg, seed);
  return probe(fresh_encoder(cfg, seed), s, cfg);
}

// ---------------------------------------------------------------------------
// Retrieval

PairSet select_pairs(const Matrix& x, const Matrix& y,
                     const std::vector<std::string>& ids,
                     const std::vector<int>& rows) {
  if (x.rows() != y.rows() || static_cast<Eigen::Index>(ids.size()) != x.rows())
    throw StructuralError("select_pairs: inputs differ in length");
  PairSet out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()), y.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    out.y.row(static_cast<Eigen::Index>(i)) = y.row(rows[i]);
    out.ids.push_back(ids[rows[i]]);
  }
  return out;
}

std::string_view to_string(RetrievalObjective objective) {
  return objective == RetrievalObjective::PC ? "pc" : "drf";
}

RetrievalObjective parse_retrieval_objective(std::string_view name) {
  if (name == "pc") return RetrievalObjective::PC;
  if (name == "drf") return RetrievalObjective::DRF;
  throw StructuralError("unknown retrieval objective '" + std::string(name) +
                        "'; valid: pc drf");
}

Matrix pmi_matrix(const CriticParams& critic, RetrievalObjective objective,
                  const Matrix& x, const Matrix& y) {
  Matrix s = evaluate_score_matrix(critic, x, y);
  const EstimatorSpec& rule = find_estimator(objective == RetrievalObjective::PC ? "pc" : "drf");
  return s.unaryExpr([&](double v) { return pointwise_pmi(rule, v); });
}

CriticParams train_retrieval_critic(const PairSet& train, const RetrievalConfig& cfg) {
  if (train.size() < 2) throw StructuralError("retrieval: need at least two training pairs");
  CriticDescriptor d = retrieval_descriptor(static_cast<int>(train.x.cols()),
                                            static_cast<int>(train.y.cols()));
  d.hidden = cfg.hidden;
  d.embed = cfg.embed;
  CriticParams critic = init_params(d, derive_seed(cfg.seed, "retrieval-critic"));
  if (cfg.epochs > 0) {
    ObjectiveSpec obj{cfg.objective == RetrievalObjective::PC ? ObjectiveKind::PC
                                                              : ObjectiveKind::DRF};
    train_pair_critic(critic, train.x, train.y,
                      {obj, cfg.batch_size, cfg.epochs, cfg.learning_rate,
                       derive_seed(cfg.seed, "retrieval-train")});
  }
  return critic;
}

RetrievalResult rank_candidates(const Matrix& pmi, int candidates,
                                std::uint64_t seed) {
  if (pmi.rows() != pmi.cols())
    throw StructuralError("rank_candidates: PMI matrix must be square");
  if (candidates < 2) throw StructuralError("rank_candidates: need k >= 2");
  const int n = static_cast<int>(pmi.rows());
  if (candidates - 1 > n - 1)
    throw StructuralError("rank_candidates: k-1 exceeds available distractors");

  RetrievalResult result;
  int hits = 0;
  for (int q = 0; q < n; ++q) {
    std::vector<int> others;
    others.reserve(static_cast<std::size_t>(n - 1));
    for (int j = 0; j < n; ++j)
      if (j != q) others.push_back(j);
    Rng rng = make_rng(seed, "distractors", static_cast<std::uint64_t>(q));
    // Partial Fisher-Yates: first k-1 entries become the distractors.
    for (int k = 0; k < candidates - 1; ++k) {
      std::uniform_int_distribution<int> pick(k, static_cast<int>(others.size()) - 1);
      std::swap(others[k], others[pick(rng)]);
    }
    RankedQuery rq;
    rq.query_id = q;
    rq.ranking.push_back({q, pmi(q, q), true});
    for (int k = 0; k < candidates - 1; ++k)
      rq.ranking.push_back({others[k], pmi(q, others[k]), false});
    std::sort(rq.ranking.begin(), rq.ranking.end(),
              [](const RankedCandidate& a, const RankedCandidate& b) {
                if (a.pmi != b.pmi) return a.pmi > b.pmi;
                return a.candidate_id < b.candidate_id;
              });
    if (rq.ranking.front().is_true) ++hits;
    result.queries.push_back(std::move(rq));
  }
  result.top1 = static_cast<double>(hits) / static_cast<double>(n);
  return result;
}

RetrievalResult run_retrieval(const PairSet& train, const PairSet& test,
                              const RetrievalConfig& config) {
  if (train.x.cols() != test.x.cols() || train.y.cols() != test.y.cols())
    throw StructuralError("retrieval: train and test dims differ");
  CriticParams critic = train_retrieval_critic(train, config);
  return rank_candidates(pmi_matrix(critic, config.objective, test.x, test.y),
                         config.candidates, derive_seed(config.seed, "retrieval-eval"));
}

// ---------------------------------------------------------------------------
// Dataset debugging

std::vector<HistogramBin> pmi_histogram(const std::vector<double>& values,
                                        double bin_width) {
  if (!(bin_width > 0.0)) throw StructuralError("histogram: bin width must be positive");
  std::vector<double> finite;
  for (double v : values)
    if (std::isfinite(v)) finite.push_back(v);
  if (finite.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(finite.begin(), finite.end());
  const double lo = std::floor(*lo_it / bin_width) * bin_width;
  const int bins = static_cast<int>(std::floor((*hi_it - lo) / bin_width)) + 1;
  std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    out[b].left = lo + b * bin_width;
    out[b].right = lo + (b + 1) * bin_width;
  }
  for (double v : finite) {
    int b = static_cast<int>(std::floor((v - lo) / bin_width));
    out[std::clamp(b, 0, bins - 1)].count += 1;
  }
  return out;
}

DebugResult run_dataset_debugging(const PairSet& train, const RetrievalConfig& config,
                                  double bin_width, int folds) {
  const int n = train.size();
  if (folds < 1 || (folds > 1 && n < 2 * folds))
    throw StructuralError("run_dataset_debugging: folds must be >= 1 with at least two pairs per fold");
  const EstimatorSpec& rule =
      find_estimator(config.objective == RetrievalObjective::PC ? "pc" : "drf");
  DebugResult r;
  r.pmi.assign(static_cast<std::size_t>(n), 0.0);
  auto score_rows = [&](const CriticParams& critic, const std::vector<int>& rows) {
    PairSet part = select_pairs(train.x, train.y, train.ids, rows);
    Matrix scores = evaluate_pair_scores(critic, part.x, part.y);
    for (std::size_t k = 0; k < rows.size(); ++k)
      r.pmi[rows[k]] = pointwise_pmi(rule, scores(static_cast<Eigen::Index>(k), 0));
  };
  if (folds == 1) {
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    score_rows(train_retrieval_critic(train, config), all);
  } else {
    // Cross-fitting: each pair is scored by a critic that never saw it, so a
    // flexible critic cannot simply memorise the mismatched pairs.
    const auto perm = random_permutation(n, derive_seed(config.seed, "debug-folds"));
    for (int f = 0; f < folds; ++f) {
      std::vector<int> held, rest;
      for (int k = 0; k < n; ++k) (k % folds == f ? held : rest).push_back(perm[k]);
      std::sort(held.begin(), held.end());
      std::sort(rest.begin(), rest.end());
      RetrievalConfig fold_config = config;
      fold_config.seed = derive_seed(config.seed, "debug-fold", static_cast<std::uint64_t>(f));
      score_rows(train_retrieval_critic(select_pairs(train.x, train.y, train.ids, rest), fold_config),
                 held);
    }
  }
  r.plugin_mi = mi_plugin_pmi(r.pmi);
  r.histogram = pmi_histogram(r.pmi, bin_width);
  for (int i = 0; i < static_cast<int>(r.pmi.size()); ++i)
    if (r.pmi[i] < 0.0) r.flagged.push_back({i, train.ids[i], r.pmi[i]});
  std::stable_sort(r.flagged.begin(), r.flagged.end(),
                   [](const FlaggedItem& a, const FlaggedItem& b) { return a.pmi < b.pmi; });
  return r;
}

std::vector<int> plant_mismatches(PairSet& pairs, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw StructuralError("plant_mismatches: fraction must be in [0, 1]");
  const int n = pairs.size();
  const int m = static_cast<int>(std::lround(fraction * n));
  if (m == 0) return {};
  if (m < 2) throw UsageError("plant_mismatches: need at least two planted pairs");
  auto perm = random_permutation(n, seed);
  std::vector<int> chosen(perm.begin(), perm.begin() + m);
  Matrix original = pairs.y;
  for (int k = 0; k < m; ++k) pairs.y.row(chosen[k]) = original.row(chosen[(k + 1) % m]);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// ---------------------------------------------------------------------------
// CSV

void write_records_csv(std::ostream& out, const TrainReport& report) {
  out << "task,estimator,seed,iteration,estimate,true_mi\n";
  const auto task = to_string(report.task);
  for (const auto& r : report.records)
    out << task << ',' << r.estimator << ',' << r.seed << ',' << r.iteration << ','
        << format_full(r.estimate) << ',' << format_full(r.true_mi) << '\n';
}

void write_summary_csv(std::ostream& out, TaskKind task,
                       const std::vector<SummaryRow>& rows) {
  out << "task,estimator,step_mi,mean,bias,std,n_seeds\n";
  for (const auto& r : rows)
    out << to_string(task) << ',' << r.estimator << ',' << format_full(r.step_mi) << ','
        << format_full(r.mean) << ',' << format_full(r.bias) << ','
        << format_full(r.std) << ',' << r.n_seeds << '\n';
}

void write_retrieval_csv(std::ostream& out, const RetrievalResult& result) {
  out << "query_id,rank,candidate_id,pmi,is_true\n";
  for (const auto& q : result.queries)
    for (std::size_t k = 0; k < q.ranking.size(); ++k)
      out << q.query_id << ',' << (k + 1) << ',' << q.ranking[k].candidate_id << ','
          << format_full(q.ranking[k].pmi) << ',' << (q.ranking[k].is_true ? 1 : 0)
          << '\n';
}

void write_histogram_csv(std::ostream& out, const std::vector<HistogramBin>& bins) {
  out << "bin_left,bin_right,count\n";
  for (const auto& b : bins)
    out << format_full(b.left) << ',' << format_full(b.right) << ',' << b.count << '\n';
}

void write_flagged_csv(std::ostream& out, const std::vector<FlaggedItem>& items) {
  out << "index,id,pmi\n";
  for (const auto& f : items)
    out << f.index << ',' << f.id << ',' << format_full(f.pmi) << '\n';
}

}  // namespace pointdep
