// Acceptance runner. Prints one PASS/FAIL/SKIP line per criterion.
//
//   shkan_acceptance            run every criterion
//   shkan_acceptance 3 6        run a subset
//
// Exit status: 0 when every selected criterion passed, 77 when all of them
// were skipped, 1 otherwise.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "shkan/basis.hpp"
#include "shkan/codec.hpp"
#include "shkan/datasets.hpp"
#include "shkan/dense_tree.hpp"
#include "shkan/experiments.hpp"
#include "shkan/network.hpp"
#include "shkan/patricia_tree.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace shkan;

namespace {

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict = Verdict::kFail;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Verdict::kPass : Verdict::kFail, std::move(detail)}; }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "shkan_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// step -> test metric from a curve CSV written by the experiment runner.
std::map<std::uint64_t, double> read_curve(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::map<std::uint64_t, double> out;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string step, train, test;
    std::getline(ss, step, ',');
    std::getline(ss, train, ',');
    std::getline(ss, test, ',');
    out[std::stoull(step)] = std::stod(test);
  }
  return out;
}

// Best-so-far metric at each requested step; NaN when the step was never checkpointed.
std::vector<double> best_so_far_at(const std::map<std::uint64_t, double>& curve, const std::vector<std::uint64_t>& at) {
  std::vector<double> out;
  for (std::uint64_t s : at) {
    if (!curve.count(s)) {
      out.push_back(std::nan(""));
      continue;
    }
    double best = INFINITY;
    for (const auto& [step, v] : curve) {
      if (step > s) break;
      best = std::min(best, v);
    }
    out.push_back(best);
  }
  return out;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) return false;
    if (i > 0 && !(v[i] < v[i - 1])) return false;
  }
  return true;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.3g", x);
  return s;
}

json run(const std::string& kind, const json& cfg, const fs::path& out) {
  return json::parse(run_experiment(kind, cfg.dump(), out, fs::path(SHKAN_SOURCE_DIR) / "configs"));
}

// ---------------------------------------------------------------------------

Outcome reconstruction() {
  const BasisProfile profile = BasisProfile::uniform(BasisKind::kSlash, 24, 0.5);
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int depth = static_cast<int>(rng() % 21);
    const NodePath b{depth == 0 ? 0 : rng() & ((std::uint64_t{1} << depth) - 1), depth};
    const double u = b.left() + b.width() * unit(rng);
    if (u >= b.left() + b.width()) continue;
    const double rebuilt = 2.0 * slash_eval(b, u, profile) -
                           (slash_eval(b.child(0), u, profile) + slash_eval(b.child(1), u, profile)) /
                               std::sqrt(profile.beta(depth + 1));
    worst = std::max(worst, std::fabs(haar_eval(b, u, profile) - rebuilt));
  }
  return verdict(worst < 1e-12, "max |haar - rebuilt| = " + fmt("%.2e", worst) + " (< 1e-12)");
}

Outcome gram() {
  constexpr int kGrid = 1 << 12;
  std::vector<std::vector<double>> columns;
  columns.emplace_back(kGrid, 1.0);  // scaling function
  for (int j = 0; j <= 5; ++j)
    for (std::uint64_t k = 0; k < (std::uint64_t{1} << j); ++k) {
      std::vector<double> c(kGrid);
      for (int i = 0; i < kGrid; ++i) c[i] = orthonormal_haar_eval(j, k, (i + 0.5) / kGrid);
      columns.push_back(std::move(c));
    }
  double worst = 0.0;
  for (std::size_t a = 0; a < columns.size(); ++a)
    for (std::size_t b = 0; b < columns.size(); ++b) {
      double dot = 0.0;
      for (int i = 0; i < kGrid; ++i) dot += columns[a][i] * columns[b][i];
      worst = std::max(worst, std::fabs(dot / kGrid - (a == b ? 1.0 : 0.0)));
    }
  return verdict(worst < 1e-10, std::to_string(columns.size()) + " functions, max |G - I| = " + fmt("%.2e", worst) +
                                    " (< 1e-10)");
}

Outcome backends() {
  const BasisProfile profile({{BasisKind::kHaar, 4, 1.0}, {BasisKind::kSlash, 14, 0.5}});
  const int p = profile.depth_count();
  PatriciaTree tree(profile, 2);
  DenseTree dense(profile, 2);
  std::mt19937_64 rng(303);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::vector<double> centres{0.1, 0.1001, 0.5, 0.77, 0.770001};
  std::set<std::uint64_t> keys;
  double worst = 0.0;
  bool bound = true;
  for (int op = 0; op < 10000; ++op) {
    const UnitCode c = op % 3 == 0 ? oracle::random_code(rng, p) : oracle::clustered_code(rng, p, centres);
    if (op % 2 == 0) {
      const std::vector<double> delta{g(rng), g(rng)};
      tree.update(c, delta, 1.0);
      dense.update(c, delta, 1.0);
      keys.insert(c.bits);
      bound = bound && tree.node_count() <= 2 * keys.size() - 1;
    } else {
      const auto a = tree.predict(c);
      const auto b = dense.predict(c);
      for (std::size_t j = 0; j < 2; ++j) worst = std::max(worst, std::fabs(a.y[j] - b.y[j]));
    }
  }
  return verdict(worst < 1e-9 && bound && tree.check_invariants(),
                 "max |patricia - dense| = " + fmt("%.2e", worst) + " (< 1e-9), nodes " +
                     std::to_string(tree.node_count()) + " for " + std::to_string(keys.size()) + " keys, bound " +
                     (bound ? "held" : "violated"));
}

Outcome codec() {
  const CodecConfig cfg = CodecConfig::float754();
  std::mt19937_64 rng(404);
  auto random_finite = [&] {
    for (;;) {
      const double x = std::bit_cast<double>(rng());
      if (std::isfinite(x)) return x;
    }
  };
  // The codec follows the raw sign-magnitude order: positives by magnitude, then negatives by magnitude.
  auto raw = [](double x) { return x == 0.0 ? std::uint64_t{0} : std::bit_cast<std::uint64_t>(x); };
  std::uint64_t disorder = 0;
  for (int i = 0; i < 1000000; ++i) {
    double x = random_finite(), y = random_finite();
    if (raw(x) > raw(y)) std::swap(x, y);
    const UnitCode a = encode(x, cfg), b = encode(y, cfg);
    if (!(a.u <= b.u && a.bits <= b.bits)) ++disorder;
  }
  double worst_rel = 0.0;
  std::uniform_real_distribution<double> mant(1.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    // Interior normal numbers, away from binade edges where the slope jumps.
    const int e = static_cast<int>(rng() % 2000) - 1000;
    const double m = 1.01 + 0.98 * (mant(rng) - 1.0);
    const double x = (rng() & 1 ? -1.0 : 1.0) * std::ldexp(m, e);
    const double h = std::fabs(x) * std::ldexp(1.0, -20);
    const double fd = (encode(x + h, cfg).u - encode(x - h, cfg).u) / (2 * h);
    const double exact = encode_derivative(x, cfg);
    worst_rel = std::max(worst_rel, std::fabs(fd - exact) / std::fabs(exact));
  }
  const double u1 = encode(1.0, cfg).u, um1 = encode(-1.0, cfg).u;
  return verdict(disorder == 0 && worst_rel < 1e-3 && u1 == 0.25 && um1 == 0.75,
                 std::to_string(disorder) + " order violations in 1e6 pairs, derivative rel err " +
                     fmt("%.2e", worst_rel) + " (< 1e-3), u(1)=" + fmt("%.17g", u1) + ", u(-1)=" + fmt("%.17g", um1));
}

Outcome gradient() {
  Network net(NetworkSpec::uniform({2, 5, 5, 1}, ResidualMode::kIdentity, CodecConfig::float754()));
  const auto task = RegressionTask::make("g", "exp(sin(pi*x1) + x2^2)", 2);
  TaskSampler source(task, 505);
  std::vector<double> x(2), t(1);
  for (int s = 0; s < 100000; ++s) {
    source.next(x, t);
    net.train_step(x, t, 1.0, StepRule::kNormalized);
  }
  std::mt19937_64 rng(506);
  std::uniform_real_distribution<double> draw(0.15, 0.85);
  const double h = 1e-7;
  int checked = 0, tried = 0;
  double worst = 0.0;
  ForwardTape a, b, c;
  while (checked < 1000 && tried < 100000) {
    ++tried;
    const std::vector<double> p{draw(rng), draw(rng)};
    const int i = tried % 2;
    std::vector<double> pp = p, pm = p;
    pp[static_cast<std::size_t>(i)] += h;
    pm[static_cast<std::size_t>(i)] -= h;
    net.forward(p, a, ForwardMode::kEvaluate);
    net.forward(pp, b, ForwardMode::kEvaluate);
    net.forward(pm, c, ForwardMode::kEvaluate);
    bool same = true;
    for (std::size_t l = 0; l < a.layers.size() && same; ++l)
      for (std::size_t j = 0; j < a.layers[l].codes.size(); ++j)
        same = same && a.layers[l].codes[j].bits == b.layers[l].codes[j].bits &&
               a.layers[l].codes[j].bits == c.layers[l].codes[j].bits;
    if (!same) continue;
    const double fd = (b.output[0] - c.output[0]) / (2 * h);
    const double exact = net.model_derivative(p, i)[0];
    worst = std::max(worst, std::fabs(fd - exact) / std::max(std::fabs(exact), 1e-3));
    ++checked;
  }
  return verdict(checked == 1000 && worst < 1e-3, std::to_string(checked) + " off-breakpoint points, max rel err " +
                                                      fmt("%.2e", worst) + " (< 1e-3)");
}

Outcome sin1d() {
  const fs::path out = scratch("sin1d");
  const json cfg = {{"task", {{"name", "sin10"}, {"expression", "sin(10*x1)"}}},
                    {"train", {{"samples", 1000000}, {"alpha", 1.0}, {"seed", 1}}},
                    {"fit1d", {{"grid", 200}}}};
  const json summary = run("fit1d", cfg, out);
  const auto curve = read_curve(out / "curve.csv");
  const auto best = best_so_far_at(curve, {10, 100, 1000, 10000, 100000, 1000000});
  const double final_rmse = summary["result"]["final_metric"].get<double>();
  return verdict(final_rmse < 2e-2 && strictly_decreasing(best),
                 "test RMSE " + fmt("%.3g", final_rmse) + " (< 2e-2), best-so-far at 1e1..1e6: " + join(best));
}

Outcome bessel() {
  const fs::path out = scratch("bessel");
  const json cfg = {{"task", {{"name", "j0_20"}, {"expression", "besselj0(20*x1)"}}},
                    {"train", {{"samples", 10000000}, {"alpha", 1.0}, {"seed", 1}}},
                    {"fit1d", {{"grid", 200}}}};
  run("fit1d", cfg, out);
  const auto curve = read_curve(out / "curve.csv");
  const auto best = best_so_far_at(curve, {100000, 1000000, 10000000});
  return verdict(strictly_decreasing(best) && best.back() < 1e-2,
                 "best-so-far RMSE at 1e5, 1e6, 1e7: " + join(best) + " (final < 1e-2)");
}

Outcome suite() {
  const fs::path out = scratch("suite");
  const json cfg = {{"catalog", "../data/acceptance_catalog.txt"},
                    {"network", {{"hidden", {5, 5}}, {"residual", "identity"}}},
                    {"train", {{"samples", 1000000}, {"test_samples", 10000}, {"seed", 1}, {"alpha", 1.0}}}};
  const json summary = run("suite", cfg, out);
  bool ok = true;
  std::string detail;
  std::vector<std::string> files;
  for (const auto& task : summary["result"]["tasks"]) {
    const double best = task["best_metric"].get<double>();
    ok = ok && best < 5e-2;
    detail += task["name"].get<std::string>() + "=" + fmt("%.3g", best) + " ";
  }
  for (const auto& e : fs::directory_iterator(out / "curves")) files.push_back(e.path().filename().string());
  std::sort(files.begin(), files.end());
  auto slurp = [&](const std::string& suffix) {
    for (const auto& f : files)
      if (f.size() > suffix.size() && f.compare(f.size() - suffix.size(), suffix.size(), suffix) == 0) {
        std::ifstream in(out / "curves" / f, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
      }
    return std::string();
  };
  const std::string a = slurp("_II.11.7.csv"), b = slurp("_III.17.37.csv");
  const bool identical = !a.empty() && a == b;
  const std::size_t count = summary["result"]["tasks"].size();
  return verdict(ok && identical && count >= 3, std::to_string(count) + " tasks, best RMSE (< 5e-2): " + detail +
                                                    "duplicate curves " + (identical ? "identical" : "differ"));
}

Outcome mnist() {
  const char* env = std::getenv("SHKAN_MNIST_DIR");
  const fs::path dir = env != nullptr ? fs::path(env) : fs::path(SHKAN_SOURCE_DIR) / "data" / "mnist";
  if (!fs::exists(dir / "train-images-idx3-ubyte"))
    return {Verdict::kSkip, "no MNIST files in " + dir.string() + " (set SHKAN_MNIST_DIR)"};
  // One epoch gates; SHKAN_MNIST_EPOCHS=30 runs the full-length check.
  const char* ep = std::getenv("SHKAN_MNIST_EPOCHS");
  const int epochs = ep != nullptr ? std::atoi(ep) : 1;
  const double threshold = epochs >= 30 ? 0.92 : 0.80;
  const fs::path out = scratch("mnist");
  const json cfg = {{"mnist", {{"dir", fs::absolute(dir).string()}, {"epochs", epochs}}},
                    {"network", {{"hidden", {10}}}},
                    {"train", {{"seed", 1}}}};
  const json summary = run("mnist", cfg, out);
  const double acc = summary["result"]["final_metric"].get<double>();
  return verdict(acc > threshold, std::to_string(epochs) + " epoch(s), test accuracy " + fmt("%.4f", acc) + " (> " +
                                      fmt("%.2f", threshold) + ")");
}

Outcome bench() {
  const auto rows = run_bench(BenchConfig{});
  std::vector<double> ln_n, n, cost_n, ln_p, ln_cost_p;
  bool capped = true;
  for (const auto& r : rows) {
    if (r.sweep == "keys") {
      ln_n.push_back(std::log(static_cast<double>(r.keys)));
      n.push_back(static_cast<double>(r.keys));
      cost_n.push_back(r.mean_nodes);
    } else {
      ln_p.push_back(std::log(static_cast<double>(r.precision)));
      ln_cost_p.push_back(std::log(r.mean_nodes));
      capped = capped && r.mean_nodes <= r.precision + 1;
    }
  }
  const LinearFit log_fit = fit_line(ln_n, cost_n);
  const LinearFit lin_fit = fit_line(n, cost_n);
  const LinearFit p_fit = fit_line(ln_p, ln_cost_p);
  const double growth = cost_n.back() / cost_n.front();
  const double log_growth = ln_n.back() / ln_n.front();
  const bool ok = log_fit.r_squared >= 0.9 && log_fit.r_squared > lin_fit.r_squared && growth <= log_growth &&
                  capped && p_fit.slope <= 1.0;
  return verdict(ok, "nodes vs ln n: R2 " + fmt("%.3f", log_fit.r_squared) + " (>= 0.9, linear-n R2 " +
                         fmt("%.3f", lin_fit.r_squared) + "), growth " + fmt("%.2f", growth) + "x (<= " +
                         fmt("%.2f", log_growth) + "x); nodes vs p: log-log slope " + fmt("%.3f", p_fit.slope) +
                         " (<= 1), nodes <= p+1 " + (capped ? "held" : "violated"));
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "reconstruction identity", 1.0, reconstruction},
      {2, "orthonormal Gram matrix", 5.0, gram},
      {3, "backend equivalence", 10.0, backends},
      {4, "codec", 5.0, codec},
      {5, "gradient consistency", 30.0, gradient},
      {6, "1D sin learning", 300.0, sin1d},
      {7, "Bessel J0 accuracy", 1800.0, bessel},
      {8, "common-hyper-parameter suite", 3600.0, suite},
      {9, "MNIST", 0.0, mnist},
      {10, "complexity bench", 300.0, bench},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int passed = 0, failed = 0, skipped = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Verdict::kFail, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.verdict == Verdict::kPass && c.budget_seconds > 0 && secs > c.budget_seconds) {
      o.verdict = Verdict::kFail;
      o.detail += "; over the " + fmt("%.0f", c.budget_seconds) + " s budget";
    }
    const char* tag = o.verdict == Verdict::kPass ? "PASS" : o.verdict == Verdict::kSkip ? "SKIP" : "FAIL";
    std::printf("[%s] %2d %s: %s (%.2f s)\n", tag, c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    (o.verdict == Verdict::kPass ? passed : o.verdict == Verdict::kSkip ? skipped : failed)++;
  }
  if (failed > 0) return 1;
  if (passed == 0 && skipped > 0) return 77;
  return 0;
}
