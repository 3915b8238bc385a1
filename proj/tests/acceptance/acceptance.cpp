// Acceptance run: one PASS/FAIL line per criterion, then a summary line.
//
// Exit status is 0 when every criterion passes or fails only among those
// listed with --known-fail; otherwise 1. Known failures still print FAIL.

#include "dpmhp/error.hpp"
#include "dpmhp/experiments.hpp"
#include "dpmhp/io.hpp"
#include "dpmhp/metrics.hpp"
#include "dpmhp/network.hpp"
#include "dpmhp/quantizer.hpp"
#include "dpmhp/rng.hpp"
#include "dpmhp/wta_loss.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
namespace ex = dpmhp::experiments;
using namespace dpmhp;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1 ------------------------------------------------------------------------
Outcome gradient_criterion(std::uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  auto eng = make_stream(seed, "acceptance/gradient");
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 1);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    NetworkSpec spec;
    spec.input_dim = 1 + static_cast<std::size_t>(i % 4);
    spec.hidden_layers = {8, 8};
    spec.activation = pick(eng) ? Activation::Tanh : Activation::ReLU;
    spec.n_hypotheses = 2 + static_cast<std::size_t>(i % 5);
    spec.label_dim = 1 + static_cast<std::size_t>(i % 3);
    auto params = init_network(spec, seed + static_cast<std::uint64_t>(i));
    for (auto& p : params.data()) p += 0.05 * g(eng);
    Point x(spec.input_dim), y(spec.label_dim);
    for (auto& v : x) v = g(eng);
    for (auto& v : y) v = g(eng);
    const WtaMetric metric = (i % 2) ? WtaMetric::log_distance(0.05) : WtaMetric::squared_euclidean();
    const double eps = (i % 3 == 0) ? 0.0 : 0.1;
    worst = std::max(worst, gradient_check(params, x, y, metric, eps));
  }
  const double sec = seconds_since(t0);
  return {worst < 1e-4 && sec < 10.0,
          "max rel error " + fmt(worst, 3) + " over 50 instances, " + fmt(sec, 3) + " s (limit 10)"};
}

// 2 ------------------------------------------------------------------------
Outcome uniform_criterion(std::uint64_t seed) {
  auto eng = make_stream(seed, "acceptance/uniform");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(20000);
  for (auto& v : s) v = u(eng);
  auto cfg = quantizer_defaults();
  cfg.seed = seed;
  auto h = fit_hypotheses(s, 1, 2, WtaMetric::squared_euclidean(), cfg);
  std::vector<double> v(h.flat().begin(), h.flat().end());
  std::sort(v.begin(), v.end());
  const bool ok = std::abs(v[0] - 0.25) <= 0.02 && std::abs(v[1] - 0.75) <= 0.02;
  return {ok, "hypotheses {" + fmt(v[0]) + ", " + fmt(v[1]) + "}"};
}

// 3 ------------------------------------------------------------------------
Outcome shares_criterion(std::uint64_t seed, unsigned threads, double& sec) {
  auto t0 = std::chrono::steady_clock::now();
  auto r = ex::run_shares(ex::SharesConfig::preset(ex::Preset::Full), seed, threads);
  sec = seconds_since(t0);
  const bool ok = r.pass && sec < 120.0;
  return {ok, "median within-band " + fmt(r.median_within_ldp) + ", median chi ldp/l2 " +
                  fmt(r.median_chi_ratio) + ", " + fmt(sec, 3) + " s (limit 120)"};
}

// 4 ------------------------------------------------------------------------
Outcome density_criterion(std::uint64_t seed, double& sec) {
  auto t0 = std::chrono::steady_clock::now();
  auto r = ex::run_density(ex::DensityConfig::preset(ex::Preset::Full), seed);
  sec = seconds_since(t0);
  const bool ok = r.pass && sec < 60.0;
  return {ok, "KS l2 vs p " + fmt(r.ks_l2_p) + " / p^1/3 " + fmt(r.ks_l2_cube) + "; ldp vs p " +
                  fmt(r.ks_ldp_p) + " / p^1/3 " + fmt(r.ks_ldp_cube) + ", " + fmt(sec, 3) + " s (limit 60)"};
}

// 5 ------------------------------------------------------------------------
Outcome call_center_criterion(std::uint64_t seed, unsigned threads, double& sec) {
  auto t0 = std::chrono::steady_clock::now();
  auto r = ex::run_call_center(ex::CallCenterConfig::preset(ex::Preset::Full), seed, threads);
  sec = seconds_since(t0);
  const bool ok = r.pass && sec < 300.0;
  return {ok, "mean rel error l2 " + fmt(r.l2.errors.mean_rel_error) + " ldp " +
                  fmt(r.ldp.errors.mean_rel_error) + " (bound 0.10); var rel error l2 " +
                  fmt(r.l2.errors.var_rel_error) + " ldp " + fmt(r.ldp.errors.var_rel_error) + ", " +
                  fmt(sec, 3) + " s (limit 300)"};
}

// 6 ------------------------------------------------------------------------
Outcome table1_criterion(std::uint64_t seed, unsigned threads, double& sec) {
  auto t0 = std::chrono::steady_clock::now();
  auto r = ex::run_table1(ex::Table1Config::preset(ex::Preset::Full), seed, threads);
  sec = seconds_since(t0);
  const bool ok = r.pass && sec < 900.0;
  const auto& n = r.nll;
  return {ok, "NLL Norm l2 " + fmt(n.l2.norm.nll_per_sample) + " ldp " + fmt(n.ldp.norm.nll_per_sample) +
                  "; KDE l2 " + fmt(n.l2.kde.nll_per_sample) + " ldp " + fmt(n.ldp.kde.nll_per_sample) + ", " +
                  fmt(sec, 3) + " s (limit 900)"};
}

// 7 ------------------------------------------------------------------------
std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), root).generic_string()] = ss.str();
  }
  return files;
}

Outcome repro_criterion(std::uint64_t seed, unsigned threads, const fs::path& work) {
  ex::ReproOptions opts;
  opts.preset = ex::Preset::Quick;
  opts.seed = seed;
  opts.threads = threads;
  const fs::path a = work / "repro_a", b = work / "repro_b";
  fs::remove_all(a);
  fs::remove_all(b);
  ex::repro(a, opts);
  // second run single-threaded: thread count must not leak into the output
  opts.threads = 1;
  ex::repro(b, opts);
  const auto fa = read_tree(a), fb = read_tree(b);
  std::size_t differing = 0;
  for (const auto& [name, body] : fa) {
    auto it = fb.find(name);
    if (it == fb.end() || it->second != body) ++differing;
  }
  const bool ok = !fa.empty() && fa.size() == fb.size() && differing == 0;
  return {ok, std::to_string(fa.size()) + " files, " + std::to_string(differing) + " differing (quick preset)"};
}

// 8 ------------------------------------------------------------------------
Outcome brute_force_criterion(std::uint64_t seed) {
  auto eng = make_stream(seed, "acceptance/brute-force");
  std::uniform_int_distribution<std::size_t> n_pick(1, 64), d_pick(1, 6);
  std::uniform_int_distribution<int> coin(0, 3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::size_t mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t n = n_pick(eng), dim = d_pick(eng);
    std::vector<Point> pts(n, Point(dim));
    for (auto& p : pts)
      for (auto& v : p) v = g(eng);
    // planted ties
    if (n > 2 && coin(eng) == 0) pts[n - 1] = pts[n / 2];
    Point y(dim);
    for (auto& v : y) v = g(eng);
    if (coin(eng) == 0) y = pts[n / 3];
    const WtaMetric metric = (i % 2) ? WtaMetric::log_distance(1e-3) : WtaMetric::squared_euclidean();
    const auto hyps = HypothesisSet::from_points(pts);
    const auto r = wta_evaluate(hyps, y, metric);

    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double d = distance(metric, pts[k], y);
      if (d < best) {
        best = d;
        arg = k;
      }
    }
    const bool same_loss = std::abs(r.loss - best) <= 1e-12 * std::max(1.0, std::abs(best));
    if (!same_loss || r.winner != arg) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over 10000 instances"};
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string known_fail_arg;
  std::string work = (fs::temp_directory_path() / "dpmhp_acceptance").string();
  std::string only_arg;
  app.add_option("--seed", seed, "run seed");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--known-fail", known_fail_arg, "comma-separated criteria documented as not met");
  app.add_option("--only", only_arg, "comma-separated subset of criteria to run");
  app.add_option("--work", work, "scratch directory");
  CLI11_PARSE(app, argc, argv);

  auto parse_set = [](const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');)
      if (!tok.empty()) out.insert(std::stoi(tok));
    return out;
  };
  std::set<int> known_fail, only;
  try {
    known_fail = parse_set(known_fail_arg);
    only = parse_set(only_arg);
  } catch (const std::exception&) {
    std::cerr << "error: criteria lists are comma-separated integers\n";
    return 1;
  }

  double t3 = 0, t4 = 0, t5 = 0, t6 = 0;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient check", [&] { return gradient_criterion(seed); }},
      {"uniform N=2 l2", [&] { return uniform_criterion(seed); }},
      {"equal shares (2-D mixture, N=150)", [&] { return shares_criterion(seed, threads, t3); }},
      {"density exponent (1-D normal, N=100)", [&] { return density_criterion(seed, t4); }},
      {"call-center moments (N=50)", [&] { return call_center_criterion(seed, threads, t5); }},
      {"conditional NLL (4-D surrogate, N=100)", [&] { return table1_criterion(seed, threads, t6); }},
      {"repro byte-identical", [&] { return repro_criterion(seed, threads, work); }},
      {"wta_evaluate vs brute force", [&] { return brute_force_criterion(seed); }},
  };

  int passed = 0, failed = 0, unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool known = known_fail.count(id) > 0;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail
              << (!o.pass && known ? " (known, see notes)" : "") << std::endl;
    if (o.pass) {
      ++passed;
    } else {
      ++failed;
      if (!known) ++unexpected;
    }
  }
  std::error_code ec;
  fs::remove_all(work, ec);
  std::cout << "SUMMARY " << passed << " passed, " << failed << " failed"
            << (failed > unexpected ? " (" + std::to_string(failed - unexpected) + " known)" : "") << std::endl;
  return unexpected == 0 ? 0 : 1;
}
