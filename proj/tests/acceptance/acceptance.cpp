// Acceptance run: one PASS/FAIL line per criterion. Quantitative criteria go
// through the pointdep command line so that the determinism check can rerun
// exactly the same commands and compare their CSV output byte for byte.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "pointdep/datagen.hpp"
#include "pointdep/estimators.hpp"
#include "pointdep/format.hpp"
#include "pointdep/objectives.hpp"
#include "pointdep/rng.hpp"

namespace fs = std::filesystem;
using namespace pointdep;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Timer {
  std::clock_t cpu0 = std::clock();
  std::chrono::steady_clock::time_point wall0 = std::chrono::steady_clock::now();
  double cpu() const { return double(std::clock() - cpu0) / CLOCKS_PER_SEC; }
  double wall() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  }
};

std::string fmt(double v) { return format_human(v); }

// ---------------------------------------------------------------------------
// Running commands and reading their output

struct Command {
  std::vector<std::string> args;  // without the program name and --out
  fs::path out;
};

std::vector<Command> g_commands;  // every command run, for the rerun check

int run_command(const std::vector<std::string>& args, const fs::path& out, bool record = true) {
  std::vector<std::string> full{"pointdep"};
  full.insert(full.end(), args.begin(), args.end());
  full.push_back("--out=" + out.string());
  std::ostringstream sink, err;
  const int code = cli::run(full, sink, err);
  if (code != 0) std::cerr << "command failed (" << code << "):" << err.str();
  if (record) g_commands.push_back({args, out});
  return code;
}

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) header.push_back(cell);
  }
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    std::stringstream s(line);
    std::string cell;
    std::map<std::string, std::string> row;
    for (std::size_t k = 0; k < header.size() && std::getline(s, cell, ','); ++k) row[header[k]] = cell;
    rows.push_back(std::move(row));
  }
  return rows;
}

double num(const std::map<std::string, std::string>& row, const std::string& key) {
  return std::stod(row.at(key));
}

struct SummaryCell {
  double mean = 0.0, std = 0.0;
};

// (estimator, step_mi) -> window statistics
std::map<std::pair<std::string, double>, SummaryCell> read_summary(const fs::path& dir) {
  std::map<std::pair<std::string, double>, SummaryCell> out;
  for (const auto& r : read_csv(dir / "summary.csv"))
    out[{r.at("estimator"), std::round(num(r, "step_mi") * 1e6) / 1e6}] = {num(r, "mean"), num(r, "std")};
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------
// 1-4: exact property suites

Verdict gradients(const fs::path& root) {
  Timer t;
  const fs::path dir = root / "gradcheck";
  const int code = run_command({"gradcheck", "--n-seeds=5", "--tolerance=1e-5"}, dir);
  double worst = 0.0;
  int rows = 0;
  std::set<std::string> objectives, designs;
  for (const auto& r : read_csv(dir / "gradcheck.csv")) {
    worst = std::max(worst, num(r, "max_rel_error"));
    objectives.insert(r.at("objective"));
    designs.insert(r.at("design"));
    ++rows;
  }
  const bool pass = code == 0 && rows == 90 && objectives.size() == 9 && designs.size() == 2 &&
                    worst < 1e-5 && t.cpu() < 60.0;
  return {pass, std::to_string(rows) + " checks, max relative error " + fmt(worst) + ", " +
                    fmt(t.cpu()) + " s CPU"};
}

Verdict exact_bounds() {
  Timer t;
  double worst_nwj = -1e300, worst_dv = -1e300, worst_eq = 0.0, worst_js = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto joint = DiscreteJoint::random(4, 4, static_cast<std::uint64_t>(k));
    const double mi = oracle_mi(joint);
    auto exact = [&](ObjectiveKind kind, const Matrix& f) {
      auto flat = flatten_for_expectation(joint, f);
      return -loss_value(ObjectiveSpec{kind}, flat.joint_values, flat.joint_weights,
                         flat.product_values, flat.product_weights);
    };
    auto rng = make_rng(static_cast<std::uint64_t>(k), "acceptance-score-tables");
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int s = 0; s < 100; ++s) {
      Matrix f(4, 4);
      for (Eigen::Index c = 0; c < f.size(); ++c) f(c) = normal(rng);
      worst_nwj = std::max(worst_nwj, exact(ObjectiveKind::NWJ, f) - mi);
      worst_dv = std::max(worst_dv, exact(ObjectiveKind::DV, f) - mi);
    }
    const Matrix r = oracle_pd_table(joint);
    const Matrix log_r = r.array().log().matrix();
    const double half_sq = 0.5 * oracle_expectations(joint, r).product_mean_sq;
    worst_eq = std::max({worst_eq, std::abs(exact(ObjectiveKind::NWJ, (log_r.array() + 1.0).matrix()) - mi),
                         std::abs(exact(ObjectiveKind::DV, log_r) - mi),
                         std::abs(exact(ObjectiveKind::DRF, r) - half_sq),
                         std::abs(exact(ObjectiveKind::DM1, log_r) - mi)});
    // JS: no single-cell perturbation of the log-ratio improves the objective.
    const double js_opt = exact(ObjectiveKind::JS, log_r);
    for (Eigen::Index c = 0; c < log_r.size(); ++c)
      for (double h : {1e-3, -1e-3}) {
        Matrix g = log_r;
        g(c) += h;
        worst_js = std::max(worst_js, exact(ObjectiveKind::JS, g) - js_opt);
      }
  }
  const bool pass = worst_nwj <= 1e-9 && worst_dv <= 1e-9 && worst_eq <= 1e-9 && worst_js <= 1e-9 &&
                    t.cpu() < 60.0;
  return {pass, "max(NWJ - MI) " + fmt(worst_nwj) + ", max(DV - MI) " + fmt(worst_dv) +
                    ", optimum gap " + fmt(worst_eq) + ", JS gain at optimum " + fmt(worst_js)};
}

Verdict pc_js_identity() {
  auto rng = make_rng(3, "acceptance-pc-js");
  std::normal_distribution<double> normal(0.0, 5.0);
  std::uniform_int_distribution<int> len(1, 128);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> p(len(rng)), q(len(rng));
    for (auto& v : p) v = normal(rng);
    for (auto& v : q) v = normal(rng);
    worst = std::max(worst, std::abs(loss_value(ObjectiveSpec{ObjectiveKind::PC}, p, q) -
                                     loss_value(ObjectiveSpec{ObjectiveKind::JS}, p, q)));
  }
  return {worst <= 1e-12, "max |PC - JS| over 1000 batches " + fmt(worst)};
}

Verdict dv_shift_and_cpc_cap() {
  auto rng = make_rng(4, "acceptance-dv-cpc");
  std::normal_distribution<double> normal(0.0, 3.0);
  double worst_shift = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> p(32), q(48);
    for (auto& v : p) v = normal(rng);
    for (auto& v : q) v = normal(rng);
    const double c = 10.0 * normal(rng);
    auto ps = p, qs = q;
    for (auto& v : ps) v += c;
    for (auto& v : qs) v += c;
    worst_shift = std::max(worst_shift, std::abs(mi_dv_bound(ps, qs) - mi_dv_bound(p, q)));
  }
  double worst_cpc = -1e300;
  std::normal_distribution<double> wide(0.0, 25.0);
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + 126 * t / 49;
    Matrix s(n, n);
    for (Eigen::Index c = 0; c < s.size(); ++c) s(c) = wide(rng);
    if (t % 2 == 0) s.diagonal().array() += 100.0;  // push towards the cap
    worst_cpc = std::max(worst_cpc, mi_cpc_bound(s) - std::log(double(n)));
  }
  return {worst_shift <= 1e-9 && worst_cpc <= 1e-12,
          "DV shift drift " + fmt(worst_shift) + ", max(CPC - ln n) " + fmt(worst_cpc)};
}

// ---------------------------------------------------------------------------
// 5-7: trained estimators

Verdict discrete_recovery(const fs::path& root) {
  Timer t;
  const fs::path dir = root / "discrete";
  const int code = run_command({"bench", "--task=discrete", "--table=demo8x8", "--estimators=pc,drf,nwj,dv",
                                "--iterations=4000", "--step-length=4000", "--window=1000",
                                "--seeds=0,1,2"},
                               dir);
  if (code != 0) return {false, "bench exited with " + std::to_string(code)};
  const double truth = oracle_mi(DiscreteJoint::named("demo8x8"));
  auto s = read_summary(dir);
  const double key = std::round(truth * 1e6) / 1e6;
  const double pc = s.at({"pc", key}).mean, drf = s.at({"drf", key}).mean;
  const double nwj = s.at({"nwj", key}).mean, dv = s.at({"dv", key}).mean;
  const bool pass = truth >= 0.5 && truth <= 1.5 && std::abs(pc - truth) <= 0.1 &&
                    std::abs(drf - truth) <= 0.1 && nwj <= truth + 0.1 && dv <= truth + 0.1 &&
                    t.cpu() < 4 * 300.0;
  return {pass, "oracle " + fmt(truth) + "; pc " + fmt(pc) + ", drf " + fmt(drf) + ", nwj " + fmt(nwj) +
                    ", dv " + fmt(dv) + "; " + fmt(t.cpu()) + " s CPU"};
}

std::vector<std::string> staircase_args(const std::string& task, const std::string& estimators) {
  return {"bench", "--task=" + task, "--dim=6", "--iterations=10000", "--step-length=2000",
          "--mi-start=1", "--mi-increment=1", "--estimators=" + estimators, "--seeds=0,1,2",
          "--batch-size=128"};
}

Verdict staircase_checks(const fs::path& dir, bool check_cpc, double cpu_seconds, double budget) {
  auto s = read_summary(dir);
  const auto& pc2 = s.at({"pc", 2.0});
  const auto& drf2 = s.at({"drf", 2.0});
  const auto& pc5 = s.at({"pc", 5.0});
  const auto& drf5 = s.at({"drf", 5.0});
  const auto& nwj5 = s.at({"nwj", 5.0});
  std::vector<std::string> failed;
  if (std::abs(pc2.mean - 2.0) > 0.5) failed.push_back("pc mean at MI=2");
  if (std::abs(drf2.mean - 2.0) > 0.5) failed.push_back("drf mean at MI=2");
  if (pc5.std > nwj5.std) failed.push_back("pc std at MI=5");
  if (drf5.std > nwj5.std) failed.push_back("drf std at MI=5");
  std::string detail = "MI=2 means: pc " + fmt(pc2.mean) + ", drf " + fmt(drf2.mean) +
                       "; MI=5 std: pc " + fmt(pc5.std) + ", drf " + fmt(drf5.std) + ", nwj " +
                       fmt(nwj5.std);
  if (check_cpc) {
    double cpc_max = -1e300;
    for (const auto& r : read_csv(dir / "records.csv"))
      if (r.at("estimator") == "cpc") cpc_max = std::max(cpc_max, num(r, "estimate"));
    if (cpc_max > std::log(128.0)) failed.push_back("cpc above ln 128");
    detail += "; cpc max " + fmt(cpc_max) + " (cap " + fmt(std::log(128.0)) + ")";
  }
  if (cpu_seconds >= budget) failed.push_back("runtime");
  detail += "; " + fmt(cpu_seconds) + " s CPU";
  if (!failed.empty()) {
    detail += "; failed:";
    for (const auto& f : failed) detail += " [" + f + "]";
  }
  return {failed.empty(), detail};
}

Verdict gaussian_staircase(const fs::path& root) {
  Timer t;
  const fs::path dir = root / "gaussian";
  if (run_command(staircase_args("gaussian", "pc,drf,nwj,cpc"), dir) != 0) return {false, "bench failed"};
  return staircase_checks(dir, true, t.cpu(), 30 * 60.0);
}

Verdict cubic_staircase(const fs::path& root) {
  Timer t;
  const fs::path dir = root / "cubic";
  if (run_command(staircase_args("cubic", "pc,drf,nwj"), dir) != 0) return {false, "bench failed"};
  return staircase_checks(dir, false, t.cpu(), 30 * 60.0);
}

// ---------------------------------------------------------------------------
// 8-10: downstream uses

double read_top1(const fs::path& dir) {
  std::ifstream in(dir / "top1.txt");
  std::string key, eq;
  double v = -1.0;
  in >> key >> eq >> v;
  return v;
}

Verdict retrieval(const fs::path& root) {
  Timer t;
  const std::vector<std::string> base{"retrieve", "--synthetic", "--alpha=0.9", "--words=5000",
                                      "--dim=100", "--k=5", "--objective=pc"};
  auto untrained_args = base;
  untrained_args.push_back("--epochs=0");
  if (run_command(base, root / "retrieval") != 0 ||
      run_command(untrained_args, root / "retrieval-untrained") != 0)
    return {false, "retrieve failed"};
  const double trained = read_top1(root / "retrieval");
  const double untrained = read_top1(root / "retrieval-untrained");
  std::set<std::string> queries;
  for (const auto& r : read_csv(root / "retrieval" / "retrieval.csv")) queries.insert(r.at("query_id"));
  const bool pass = queries.size() >= 500 && trained >= 0.90 && std::abs(untrained - 0.2) <= 0.05 &&
                    t.wall() < 600.0;
  return {pass, std::to_string(queries.size()) + " queries; top-1 trained " + fmt(trained) +
                    ", untrained " + fmt(untrained) + "; " + fmt(t.wall()) + " s"};
}

Verdict dataset_debugging(const fs::path& root) {
  const fs::path dir = root / "debug";
  if (run_command({"debug-dataset", "--synthetic", "--alpha=0.9", "--words=5000", "--dim=100",
                   "--plant-fraction=0.05", "--objective=pc"},
                  dir) != 0)
    return {false, "debug-dataset failed"};
  std::set<int> planted, flagged;
  for (const auto& r : read_csv(dir / "planted.csv")) planted.insert(std::stoi(r.at("index")));
  for (const auto& r : read_csv(dir / "flagged.csv")) flagged.insert(std::stoi(r.at("index")));
  int total = 0;
  for (const auto& r : read_csv(dir / "histogram.csv")) total += std::stoi(r.at("count"));
  int hit = 0;
  for (int i : flagged) hit += planted.count(i) ? 1 : 0;
  const double recall = double(hit) / double(planted.size());
  const double fpr = double(flagged.size() - hit) / double(total - static_cast<int>(planted.size()));
  return {recall >= 0.80 && fpr <= 0.05,
          std::to_string(planted.size()) + " planted of " + std::to_string(total) + "; recall " +
              fmt(recall) + ", false-positive rate " + fmt(fpr)};
}

Verdict selfsup(const fs::path& root) {
  Timer t;
  const fs::path dir = root / "selfsup";
  if (run_command({"selfsup", "--objectives=cpc,pcc,drfc", "--seeds=0,1,2"}, dir) != 0)
    return {false, "selfsup failed"};
  std::map<std::string, std::map<std::string, double>> acc;  // seed -> objective -> accuracy
  for (const auto& r : read_csv(dir / "selfsup.csv")) acc[r.at("seed")][r.at("objective")] = num(r, "accuracy");
  std::map<std::string, double> min_gap{{"cpc", 1e300}, {"pcc", 1e300}, {"drfc", 1e300}};
  for (auto& [seed, by] : acc)
    for (auto& [name, gap] : min_gap) gap = std::min(gap, by.at(name) - by.at("random"));
  bool pass = acc.size() == 3 && t.wall() < 900.0;
  std::string detail = "smallest per-seed gain over random encoder:";
  for (const auto& [name, gap] : min_gap) {
    pass = pass && gap >= 0.10;
    detail += " " + name + " " + fmt(100.0 * gap) + " pts";
  }
  return {pass, detail + "; " + fmt(t.wall()) + " s"};
}

// ---------------------------------------------------------------------------
// 11: determinism

Verdict determinism(const fs::path& root) {
  int files = 0;
  std::vector<std::string> differing;
  const auto commands = g_commands;
  for (const auto& c : commands) {
    const fs::path again = root / "rerun" / c.out.filename();
    fs::remove_all(again);
    if (run_command(c.args, again, false) != 0) {
      differing.push_back(c.out.filename().string() + " (rerun failed)");
      continue;
    }
    for (const auto& entry : fs::directory_iterator(c.out)) {
      if (entry.path().extension() != ".csv") continue;
      ++files;
      if (slurp(entry.path()) != slurp(again / entry.path().filename()))
        differing.push_back(c.out.filename().string() + "/" + entry.path().filename().string());
    }
  }
  std::string detail = std::to_string(commands.size()) + " commands rerun, " + std::to_string(files) +
                       " CSV files compared";
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty() && files > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pointdep acceptance run"};
  std::string out = "acceptance_out";
  std::vector<int> only;
  app.add_option("--out", out, "Working directory for command outputs");
  app.add_option("--only", only, "Run only these criteria (determinism reruns whatever ran)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const fs::path root = fs::absolute(out);
  fs::create_directories(root);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradient correctness", [&] { return gradients(root); }},
      {"exact-expectation bounds", exact_bounds},
      {"PC/JS identity", pc_js_identity},
      {"DV shift invariance and CPC cap", dv_shift_and_cpc_cap},
      {"discrete oracle recovery", [&] { return discrete_recovery(root); }},
      {"Gaussian staircase", [&] { return gaussian_staircase(root); }},
      {"cubic staircase", [&] { return cubic_staircase(root); }},
      {"retrieval", [&] { return retrieval(root); }},
      {"dataset debugging", [&] { return dataset_debugging(root); }},
      {"self-supervised toy", [&] { return selfsup(root); }},
      {"determinism", [&] { return determinism(root); }},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[k].first << ": " << v.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
