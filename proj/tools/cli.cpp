#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "pointdep/error.hpp"
#include "pointdep/experiments.hpp"
#include "pointdep/format.hpp"
#include "pointdep/gradcheck.hpp"
#include "pointdep/rng.hpp"

namespace pointdep::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size() || item.front() == '-') throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw StructuralError("invalid seed '" + item + "' in seed list");
    }
  }
  if (out.empty()) throw StructuralError("empty seed list");
  return out;
}

// Explicit --seeds wins; otherwise `count` consecutive seeds from --seed.
std::vector<std::uint64_t> resolve_seeds(const std::string& list, std::uint64_t base, int count) {
  if (!list.empty()) return parse_seed_list(list);
  if (count < 1) throw StructuralError("seed count must be >= 1");
  std::vector<std::uint64_t> out;
  for (int k = 0; k < count; ++k) out.push_back(base + static_cast<std::uint64_t>(k));
  return out;
}

std::string seeds_to_string(const std::vector<std::uint64_t>& seeds) {
  std::vector<std::string> s;
  for (auto v : seeds) s.push_back(std::to_string(v));
  return join(s);
}

struct Common {
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string config;
  int jobs = 1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Global seed; all randomness derives from it");
  sub->add_option("--out", c.out, "Output directory");
  sub->add_option("--config", c.config, "key = value configuration file (flags win)");
  sub->add_option("--jobs", c.jobs, "Worker threads for independent jobs");
}

fs::path prepare_output(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create output directory '" + dir + "'" +
                  (ec ? ": " + ec.message() : ""));
  return fs::path(dir);
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  return f;
}

void close_output(std::ofstream& f, const fs::path& path) {
  f.flush();
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  auto f = open_output(path);
  body(f);
  close_output(f, path);
}

// Every option of the subcommand with its resolved value, in declaration
// order, plus any derived settings.
void echo_config(const CLI::App* sub, const fs::path& dir,
                 const std::vector<std::pair<std::string, std::string>>& derived) {
  write_file(dir / "config.txt", [&](std::ostream& o) {
    o << "# pointdep " << sub->get_name() << " effective configuration\n";
    for (const CLI::Option* opt : sub->get_options()) {
      const std::string name = opt->get_single_name();
      if (name.empty() || name == "help" || name == "config") continue;
      std::string value;
      if (opt->count() > 0) {
        value = opt->results().back();
      } else {
        value = opt->get_default_str();
      }
      if (opt->get_type_size() == 0 && value.empty()) value = "false";
      o << name << " = " << value << "\n";
    }
    for (const auto& [k, v] : derived) o << k << " = " << v << "\n";
  });
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  Common common;
  std::string task = "gaussian";
  std::string estimators = join(estimator_names());
  std::string seeds;
  int n_seeds = 3;
  BenchmarkConfig config;
};

void add_bench(CLI::App& app, BenchArgs& a, std::function<int()>& action, std::ostream& out) {
  auto* sub = app.add_subcommand("bench", "MI staircase benchmark");
  add_common(sub, a.common);
  auto& c = a.config;
  sub->add_option("--task", a.task, "gaussian | cubic | discrete");
  sub->add_option("--dim", c.dim, "Per-variable dimension (Gaussian tasks)");
  sub->add_option("--batch-size", c.batch_size);
  sub->add_option("--iterations", c.iterations);
  sub->add_option("--step-length", c.step_length, "Iterations per MI step");
  sub->add_option("--mi-start", c.mi_start);
  sub->add_option("--mi-increment", c.mi_increment);
  sub->add_option("--estimators", a.estimators, "Comma-separated estimator names");
  sub->add_option("--lr", c.learning_rate);
  sub->add_option("--seeds", a.seeds, "Comma-separated seeds (overrides --seed/--n-seeds)");
  sub->add_option("--n-seeds", a.n_seeds, "Consecutive seeds starting at --seed");
  sub->add_option("--window", c.window, "Summary window (last iterations of each step)");
  sub->add_option("--table", c.table, "Discrete table name");
  sub->add_option("--hidden", c.hidden);
  sub->add_option("--clip", c.clip, "SMILE clip on the score scale");
  sub->add_option("--lambda", c.lambda, "DM-I dual variable (fixed)");
  sub->add_option("--eta", c.eta, "DM-II penalty");
  action = [&a, sub, &out] {
    auto& c = a.config;
    c.task = parse_task(a.task);
    c.estimators = split_list(a.estimators);
    c.seeds = resolve_seeds(a.seeds, a.common.seed, a.n_seeds);
    c.jobs = a.common.jobs;
    c.validate();
    const fs::path dir = prepare_output(a.common.out);
    std::vector<std::pair<std::string, std::string>> derived{
        {"resolved_seeds", seeds_to_string(c.seeds)}};
    if (c.task == TaskKind::Discrete)
      derived.emplace_back("oracle_mi", format_full(oracle_mi(DiscreteJoint::named(c.table))));
    echo_config(sub, dir, derived);

    TrainReport report = run_staircase(c);
    auto summary = summarize_bias_variance(report);
    write_file(dir / "records.csv", [&](std::ostream& o) { write_records_csv(o, report); });
    write_file(dir / "summary.csv",
               [&](std::ostream& o) { write_summary_csv(o, c.task, summary); });
    out << "estimator  step_mi  mean  bias  std\n";
    for (const auto& r : summary)
      out << r.estimator << "  " << format_human(r.step_mi) << "  " << format_human(r.mean)
          << "  " << format_human(r.bias) << "  " << format_human(r.std) << "\n";
    return kOk;
  };
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradArgs {
  Common common;
  std::string seeds;
  int n_seeds = 5;
  double tolerance = 1e-5;
  GradcheckConfig config;
};

void add_gradcheck(CLI::App& app, GradArgs& a, std::function<int()>& action, std::ostream& out) {
  auto* sub = app.add_subcommand("gradcheck", "Finite-difference check of every objective");
  add_common(sub, a.common);
  sub->add_option("--seeds", a.seeds, "Comma-separated seeds (overrides --seed/--n-seeds)");
  sub->add_option("--n-seeds", a.n_seeds);
  sub->add_option("--tolerance", a.tolerance, "Maximum relative error");
  sub->add_option("--step", a.config.step, "Central-difference step");
  sub->add_option("--batch-size", a.config.batch);
  sub->add_option("--hidden", a.config.hidden);
  // Test hook: scale analytic gradients to check that failures are caught.
  sub->add_option("--corrupt-gradient", a.config.corrupt)->group("");
  action = [&a, sub, &out] {
    a.config.seeds = resolve_seeds(a.seeds, a.common.seed, a.n_seeds);
    if (!(a.tolerance > 0.0)) throw StructuralError("gradcheck: tolerance must be positive");
    const fs::path dir = prepare_output(a.common.out);
    echo_config(sub, dir, {{"resolved_seeds", seeds_to_string(a.config.seeds)}});

    auto rows = run_gradcheck(a.config);
    write_file(dir / "gradcheck.csv", [&](std::ostream& o) {
      o << "objective,design,seed,max_rel_error\n";
      for (const auto& r : rows)
        o << to_string(r.objective) << ',' << to_string(r.design) << ',' << r.seed << ','
          << format_full(r.max_relative_error) << '\n';
    });
    bool ok = true;
    out << "objective  max_rel_error\n";
    for (auto kind : gradcheck_objectives()) {
      double worst = 0.0;
      for (const auto& r : rows)
        if (r.objective == kind) worst = std::max(worst, r.max_relative_error);
      const bool pass = worst < a.tolerance;
      ok = ok && pass;
      out << to_string(kind) << "  " << format_human(worst) << (pass ? "  ok" : "  FAIL") << "\n";
    }
    return ok ? kOk : kIoFailure;
  };
}

// ---------------------------------------------------------------------------
// Paired data for retrieve and debug-dataset

struct PairDataArgs {
  bool synthetic = false;
  double alpha = 0.9;
  int words = 5000;
  int dim = 100;
  double train_fraction = 0.9;
  std::string audio;
  std::string text;
};

void add_pair_data(CLI::App* sub, PairDataArgs& d) {
  sub->add_flag("--synthetic", d.synthetic, "Use the synthetic cross-modal generator");
  sub->add_option("--alpha", d.alpha, "Synthetic dependency strength in [0, 1]");
  sub->add_option("--words", d.words, "Synthetic vocabulary size");
  sub->add_option("--dim", d.dim, "Synthetic feature dimension");
  sub->add_option("--train-fraction", d.train_fraction);
  sub->add_option("--audio", d.audio, "Word-vector file for the query modality");
  sub->add_option("--text", d.text, "Word-vector file for the candidate modality");
}

struct PairData {
  PairSet train;
  PairSet test;
};

PairData load_pairs(const PairDataArgs& d, std::uint64_t seed) {
  if (!(d.train_fraction > 0.0 && d.train_fraction < 1.0))
    throw StructuralError("train fraction must be in (0, 1)");
  if (d.synthetic) {
    if (!d.audio.empty() || !d.text.empty())
      throw StructuralError("--synthetic cannot be combined with --audio/--text");
    if (d.alpha < 0.0 || d.alpha > 1.0) throw StructuralError("alpha must be in [0, 1]");
    auto cm = make_crossmodal_dataset(d.words, d.dim, d.alpha, derive_seed(seed, "crossmodal"),
                                      d.train_fraction);
    return {select_pairs(cm.audio, cm.text, cm.tokens, cm.train),
            select_pairs(cm.audio, cm.text, cm.tokens, cm.test)};
  }
  if (d.audio.empty() || d.text.empty())
    throw StructuralError("need --synthetic or both --audio and --text");
  auto aligned = align_by_token(read_word_vectors_file(d.audio), read_word_vectors_file(d.text));
  const int n = static_cast<int>(aligned.tokens.size());
  auto perm = random_permutation(n, derive_seed(seed, "split"));
  const int n_train = static_cast<int>(std::lround(d.train_fraction * n));
  std::vector<int> train(perm.begin(), perm.begin() + n_train), test(perm.begin() + n_train, perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {select_pairs(aligned.first, aligned.second, aligned.tokens, train),
          select_pairs(aligned.first, aligned.second, aligned.tokens, test)};
}

struct CriticArgs {
  std::string objective = "pc";
  RetrievalConfig config;
};

void add_critic_options(CLI::App* sub, CriticArgs& c) {
  sub->add_option("--objective", c.objective, "pc | drf");
  sub->add_option("--hidden", c.config.hidden);
  sub->add_option("--embed", c.config.embed);
  sub->add_option("--batch-size", c.config.batch_size);
  sub->add_option("--epochs", c.config.epochs, "0 leaves the critic untrained");
  sub->add_option("--lr", c.config.learning_rate);
}

// ---------------------------------------------------------------------------
// retrieve

struct RetrieveArgs {
  Common common;
  PairDataArgs data;
  CriticArgs critic;
  int k = 5;
};

void add_retrieve(CLI::App& app, RetrieveArgs& a, std::function<int()>& action, std::ostream& out) {
  auto* sub = app.add_subcommand("retrieve", "1:k cross-modal retrieval by estimated PMI");
  add_common(sub, a.common);
  add_pair_data(sub, a.data);
  add_critic_options(sub, a.critic);
  sub->add_option("--k", a.k, "Candidates per query (true partner + k-1 distractors)");
  action = [&a, sub, &out] {
    auto& cfg = a.critic.config;
    cfg.objective = parse_retrieval_objective(a.critic.objective);
    cfg.candidates = a.k;
    cfg.seed = a.common.seed;
    PairData data = load_pairs(a.data, a.common.seed);
    if (a.k < 2 || a.k > data.test.size())
      throw StructuralError("k must be in [2, number of test pairs]");
    const fs::path dir = prepare_output(a.common.out);
    echo_config(sub, dir, {{"train_pairs", std::to_string(data.train.size())},
                           {"test_pairs", std::to_string(data.test.size())}});
    auto result = run_retrieval(data.train, data.test, cfg);
    write_file(dir / "retrieval.csv", [&](std::ostream& o) { write_retrieval_csv(o, result); });
    write_file(dir / "top1.txt",
               [&](std::ostream& o) { o << "top1 = " << format_full(result.top1) << "\n"; });
    out << "top-1 accuracy (1:" << a.k << ", " << data.test.size()
        << " queries) = " << format_human(result.top1) << "\n";
    return kOk;
  };
}

// ---------------------------------------------------------------------------
// selfsup

struct SelfSupArgs {
  Common common;
  std::string objectives = "cpc,pcc,drfc";
  std::string seeds;
  int n_seeds = 3;
  SelfSupConfig config;
};

void add_selfsup(CLI::App& app, SelfSupArgs& a, std::function<int()>& action, std::ostream& out) {
  auto* sub = app.add_subcommand("selfsup", "Two-view contrastive toy with a linear probe");
  add_common(sub, a.common);
  auto& c = a.config;
  sub->add_option("--objectives", a.objectives, "Comma-separated: cpc, pcc, drfc");
  sub->add_option("--seeds", a.seeds, "Comma-separated seeds (overrides --seed/--n-seeds)");
  sub->add_option("--n-seeds", a.n_seeds);
  sub->add_option("--classes", c.classes);
  sub->add_option("--input-dim", c.input_dim);
  sub->add_option("--train-samples", c.train_samples);
  sub->add_option("--test-samples", c.test_samples);
  sub->add_option("--noise", c.noise, "View noise standard deviation");
  sub->add_option("--hidden", c.hidden);
  sub->add_option("--embed", c.embed);
  sub->add_option("--batch-size", c.batch_size);
  sub->add_option("--epochs", c.epochs);
  sub->add_option("--lr", c.learning_rate);
  sub->add_option("--probe-steps", c.probe_steps);
  sub->add_option("--probe-lr", c.probe_learning_rate);
  action = [&a, sub, &out] {
    std::vector<ContrastiveObjective> objectives;
    for (const auto& name : split_list(a.objectives)) objectives.push_back(parse_contrastive(name));
    if (objectives.empty()) throw StructuralError("no objectives selected");
    if (a.config.noise < 0.0) throw StructuralError("noise must be >= 0");
    const auto seeds = resolve_seeds(a.seeds, a.common.seed, a.n_seeds);
    const fs::path dir = prepare_output(a.common.out);
    echo_config(sub, dir, {{"resolved_seeds", seeds_to_string(seeds)}});

    // Rows: each objective then the random-encoder baseline, per seed.
    struct Cell {
      std::string name;
      std::uint64_t seed;
      int objective;  // -1 for the baseline
      double accuracy = 0.0;
    };
    std::vector<Cell> cells;
    for (auto seed : seeds) {
      for (std::size_t k = 0; k < objectives.size(); ++k)
        cells.push_back({std::string(to_string(objectives[k])), seed, static_cast<int>(k)});
      cells.push_back({"random", seed, -1});
    }
    parallel_for(static_cast<int>(cells.size()), a.common.jobs, [&](int i) {
      auto& cell = cells[i];
      cell.accuracy = cell.objective < 0
                          ? run_random_encoder_baseline(a.config, cell.seed)
                          : run_selfsup_toy(objectives[cell.objective], a.config, cell.seed);
    });
    write_file(dir / "selfsup.csv", [&](std::ostream& o) {
      o << "objective,seed,accuracy\n";
      for (const auto& c : cells) o << c.name << ',' << c.seed << ',' << format_full(c.accuracy) << '\n';
    });
    for (const auto& c : cells)
      out << c.name << "  seed " << c.seed << "  accuracy " << format_human(c.accuracy) << "\n";
    return kOk;
  };
}

// ---------------------------------------------------------------------------
// debug-dataset

struct DebugArgs {
  Common common;
  PairDataArgs data;
  CriticArgs critic;
  double bin_width = 0.5;
  double plant_fraction = 0.0;
  int folds = 2;
};

void add_debug(CLI::App& app, DebugArgs& a, std::function<int()>& action, std::ostream& out) {
  auto* sub = app.add_subcommand("debug-dataset", "Flag training pairs with negative PMI");
  add_common(sub, a.common);
  add_pair_data(sub, a.data);
  add_critic_options(sub, a.critic);
  sub->add_option("--bin-width", a.bin_width, "PMI histogram bin width");
  sub->add_option("--plant-fraction", a.plant_fraction,
                  "Fraction of training pairs to mismatch deliberately");
  sub->add_option("--folds", a.folds, "Cross-fitting folds (1 scores pairs in-sample)");
  action = [&a, sub, &out] {
    auto& cfg = a.critic.config;
    cfg.objective = parse_retrieval_objective(a.critic.objective);
    cfg.seed = a.common.seed;
    if (!(a.bin_width > 0.0)) throw StructuralError("bin width must be positive");
    if (a.plant_fraction < 0.0 || a.plant_fraction > 1.0)
      throw StructuralError("plant fraction must be in [0, 1]");
    PairData data = load_pairs(a.data, a.common.seed);
    const fs::path dir = prepare_output(a.common.out);
    echo_config(sub, dir, {{"train_pairs", std::to_string(data.train.size())}});

    const auto planted =
        plant_mismatches(data.train, a.plant_fraction, derive_seed(a.common.seed, "plant"));
    auto result = run_dataset_debugging(data.train, cfg, a.bin_width, a.folds);
    write_file(dir / "histogram.csv", [&](std::ostream& o) { write_histogram_csv(o, result.histogram); });
    write_file(dir / "flagged.csv", [&](std::ostream& o) { write_flagged_csv(o, result.flagged); });
    out << "pairs " << data.train.size() << ", flagged " << result.flagged.size()
        << ", plug-in MI " << format_human(result.plugin_mi) << "\n";
    if (!planted.empty()) {
      write_file(dir / "planted.csv", [&](std::ostream& o) {
        o << "index,id\n";
        for (int i : planted) o << i << ',' << data.train.ids[i] << '\n';
      });
      int hit = 0;
      for (const auto& f : result.flagged)
        hit += std::binary_search(planted.begin(), planted.end(), f.index);
      const double clean = static_cast<double>(data.train.size() - planted.size());
      out << "planted " << planted.size() << ", recovered "
          << format_human(static_cast<double>(hit) / planted.size()) << ", false-positive rate "
          << format_human((result.flagged.size() - hit) / clean) << "\n";
    }
    return kOk;
  };
}

// Splices config-file flags in right after the subcommand name so the
// command line, which comes later, takes precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::size_t sub = 1;
  while (sub < args.size() && args[sub].rfind("-", 0) == 0) ++sub;
  if (sub >= args.size()) return args;
  auto extra = read_config_file(path);
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<long>(sub) + 1);
  out.insert(out.end(), extra.begin(), extra.end());
  out.insert(out.end(), args.begin() + static_cast<long>(sub) + 1, args.end());
  return out;
}

}  // namespace

std::vector<std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::vector<std::string> flags;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string key = eq == std::string::npos ? "" : trim(line.substr(0, eq));
    if (key.empty())
      throw StructuralError(path + ":" + std::to_string(number) + ": expected 'key = value'");
    if (key == "config")
      throw StructuralError(path + ":" + std::to_string(number) + ": nested config files are not supported");
    flags.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
  }
  return flags;
}

int run(const std::vector<std::string>& raw, std::ostream& out, std::ostream& err) {
  BenchArgs bench;
  GradArgs grad;
  RetrieveArgs retrieve;
  SelfSupArgs selfsup;
  DebugArgs debug;
  std::function<int()> act_bench, act_grad, act_retrieve, act_selfsup, act_debug;

  CLI::App app{"pointdep: point-wise dependency estimation experiments"};
  app.name("pointdep");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  add_bench(app, bench, act_bench, out);
  add_gradcheck(app, grad, act_grad, out);
  add_retrieve(app, retrieve, act_retrieve, out);
  add_selfsup(app, selfsup, act_selfsup, out);
  add_debug(app, debug, act_debug, out);

  try {
    std::vector<std::string> args = expand_config(raw);
    // CLI11 consumes arguments from the back.
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg;
    const int code = app.exit(e, out, msg);
    err << msg.str();
    return code == 0 ? kOk : kInvalidInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "bench") return act_bench();
    if (name == "gradcheck") return act_grad();
    if (name == "retrieve") return act_retrieve();
    if (name == "selfsup") return act_selfsup();
    return act_debug();
  } catch (const StructuralError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace pointdep::cli
