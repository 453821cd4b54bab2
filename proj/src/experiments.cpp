#include "shkan/experiments.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "shkan/codec.hpp"
#include "shkan/datasets.hpp"
#include "shkan/error.hpp"
#include "shkan/patricia_tree.hpp"

namespace shkan {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config parsing.

void check_keys(const json& j, const std::string& section, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) fail(ErrorKind::kConfig, section + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) fail(ErrorKind::kConfig, "unknown key '" + key + "' in " + section);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::kConfig, std::string("bad value for '") + key + "'");
  }
}

CodecConfig parse_codec(const json& j) {
  check_keys(j, "codec", {"kind", "significand_bits", "bits"});
  const auto kind = codec_kind_from_string(get_or<std::string>(j, "kind", "float754"));
  CodecConfig cfg = kind == CodecKind::kFixed ? CodecConfig::fixed(get_or<int>(j, "bits", 16))
                                              : CodecConfig::float754(get_or<int>(j, "significand_bits", 16));
  cfg.validate();
  return cfg;
}

AmplitudeConvention parse_convention(const std::string& s) {
  if (s == "discounted") return AmplitudeConvention::kDiscounted;
  if (s == "unit") return AmplitudeConvention::kUnit;
  fail(ErrorKind::kConfig, "unknown amplitude convention '" + s + "'");
}

StepNormalization parse_normalization(const std::string& s) {
  if (s == "path_energy") return StepNormalization::kPathEnergy;
  if (s == "none") return StepNormalization::kNone;
  fail(ErrorKind::kConfig, "unknown step normalization '" + s + "'");
}

BasisProfile parse_profile(const json* regions, const CodecConfig& codec, const json& network) {
  const auto convention = parse_convention(get_or<std::string>(network, "convention", "discounted"));
  const auto normalization = parse_normalization(get_or<std::string>(network, "normalization", "path_energy"));
  std::vector<ProfileRegion> parsed;
  if (regions == nullptr) {
    parsed = default_profile(codec).regions();
  } else {
    if (!regions->is_array()) fail(ErrorKind::kConfig, "profile must be an array of regions");
    for (const auto& r : *regions) {
      check_keys(r, "profile region", {"kind", "depths", "beta"});
      parsed.push_back({basis_kind_from_string(get_or<std::string>(r, "kind", "slash")), get_or<int>(r, "depths", 0),
                        get_or<double>(r, "beta", 0.5)});
    }
  }
  return BasisProfile(parsed, convention, normalization);
}

NetworkSpec parse_network(const json& j, int in_dim, int out_dim, std::vector<int> default_hidden,
                          ResidualMode default_residual, const CodecConfig& default_input_codec) {
  check_keys(j, "network",
             {"hidden", "residual", "codec", "input_codec", "profile", "input_profile", "convention", "normalization"});
  NetworkSpec spec;
  spec.widths.push_back(in_dim);
  for (int w : get_or<std::vector<int>>(j, "hidden", default_hidden)) spec.widths.push_back(w);
  spec.widths.push_back(out_dim);
  spec.residual = j.contains("residual") ? residual_mode_from_string(get_or<std::string>(j, "residual", ""))
                                         : default_residual;
  const CodecConfig codec = j.contains("codec") ? parse_codec(j.at("codec")) : CodecConfig::float754();
  const CodecConfig input_codec = j.contains("input_codec") ? parse_codec(j.at("input_codec")) : default_input_codec;
  const json* profile = j.contains("profile") ? &j.at("profile") : nullptr;
  const json* input_profile = j.contains("input_profile") ? &j.at("input_profile") : profile;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const CodecConfig& c = l == 0 ? input_codec : codec;
    spec.layers.push_back({c, parse_profile(l == 0 ? input_profile : profile, c, j)});
  }
  spec.validate();
  return spec;
}

struct Seeds {
  std::uint64_t weights = 1;
  std::uint64_t train = 2;
  std::uint64_t test = 3;
};

struct TrainSection {
  TrainConfig cfg;
  Seeds seeds;
  std::size_t test_samples = 10000;
  bool samples_given = false;
};

TrainSection parse_train(const json& j) {
  check_keys(j, "train",
             {"alpha", "step_rule", "samples", "seed", "weight_seed", "train_seed", "test_seed", "test_samples",
              "init_scale", "eval_interval", "checkpoints_per_decade", "parallel", "abort_on_nan"});
  TrainSection t;
  t.cfg.alpha = get_or<double>(j, "alpha", 1.0);
  t.cfg.step_rule = step_rule_from_string(get_or<std::string>(j, "step_rule", "normalized"));
  t.samples_given = j.contains("samples");
  t.cfg.samples = get_or<std::uint64_t>(j, "samples", 1000000);
  const auto seed = get_or<std::uint64_t>(j, "seed", 1);
  t.seeds.weights = get_or<std::uint64_t>(j, "weight_seed", seed);
  t.seeds.train = get_or<std::uint64_t>(j, "train_seed", seed + 1);
  t.seeds.test = get_or<std::uint64_t>(j, "test_seed", seed + 2);
  t.cfg.weight_seed = t.seeds.weights;
  t.test_samples = get_or<std::size_t>(j, "test_samples", 10000);
  t.cfg.init_scale = get_or<double>(j, "init_scale", 0.0);
  t.cfg.eval_interval = get_or<std::uint64_t>(j, "eval_interval", 0);
  t.cfg.checkpoints_per_decade = get_or<int>(j, "checkpoints_per_decade", 0);
  t.cfg.parallel = get_or<bool>(j, "parallel", false);
  t.cfg.abort_on_nan = get_or<bool>(j, "abort_on_nan", true);
  t.cfg.validate();
  return t;
}

fs::path resolve(const fs::path& p, const fs::path& base) { return p.is_absolute() || base.empty() ? p : base / p; }

RegressionTask parse_task(const json& j) {
  check_keys(j, "task", {"name", "expression", "dim", "domain"});
  const auto expression = get_or<std::string>(j, "expression", "");
  if (expression.empty()) fail(ErrorKind::kConfig, "task.expression is required");
  const Expression parsed = Expression::parse(expression);
  const int dim = get_or<int>(j, "dim", std::max(parsed.arity(), 1));
  const auto domain = get_or<std::vector<double>>(j, "domain", {0.1, 0.9});
  if (domain.size() != 2) fail(ErrorKind::kConfig, "task.domain must be [lo, hi]");
  return RegressionTask::make(get_or<std::string>(j, "name", "task"), expression, dim, domain[0], domain[1]);
}

std::vector<RegressionTask> select_tasks(const json& root, const fs::path& base) {
  if (root.contains("task")) return {parse_task(root.at("task"))};
  if (!root.contains("catalog")) fail(ErrorKind::kConfig, "need either 'task' or 'catalog'");
  auto tasks = load_catalog(resolve(get_or<std::string>(root, "catalog", ""), base));
  if (root.contains("tasks")) {
    const auto names = get_or<std::vector<std::string>>(root, "tasks", {});
    std::vector<RegressionTask> picked;
    for (const auto& name : names) {
      bool found = false;
      for (const auto& t : tasks)
        if (t.name == name) {
          picked.push_back(t);
          found = true;
        }
      if (!found) fail(ErrorKind::kConfig, "task '" + name + "' is not in the catalog");
    }
    tasks = std::move(picked);
  }
  if (tasks.empty()) fail(ErrorKind::kConfig, "no tasks selected");
  return tasks;
}

// ---------------------------------------------------------------------------
// Output helpers.

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_output(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  auto out = open_output(path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "failed writing " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) fail(ErrorKind::kIo, "failed writing " + path.string());
}

std::string safe_name(const std::string& name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

/// Streams checkpoints to a CSV as they arrive.
class CurveWriter {
 public:
  CurveWriter(const fs::path& path, const char* metric_column, bool verbose, std::string label)
      : out_(open_output(path)), verbose_(verbose), label_(std::move(label)) {
    out_ << "step,train_rmse," << metric_column << ",nodes,skipped\n";
  }

  void operator()(const CurvePoint& p) {
    out_ << p.step << ',' << format_double(p.train_rmse) << ',' << format_double(p.test_metric) << ',' << p.nodes
         << ',' << p.skipped << '\n';
    out_.flush();
    if (!out_) fail(ErrorKind::kIo, "failed writing curve file");
    if (verbose_ && (p.step == 0 || is_power_of_ten(p.step)))
      std::fprintf(stderr, "[%s] step %llu test %.4g nodes %zu\n", label_.c_str(),
                   static_cast<unsigned long long>(p.step), p.test_metric, p.nodes);
  }

 private:
  static bool is_power_of_ten(std::uint64_t v) {
    while (v % 10 == 0 && v > 1) v /= 10;
    return v == 1;
  }

  std::ofstream out_;
  bool verbose_;
  std::string label_;
};

json report_json(const TrainReport& r) {
  return {{"presented", r.presented},
          {"processed", r.processed},
          {"skipped", r.skipped},
          {"initial_metric", r.initial_metric},
          {"final_metric", r.final_metric},
          {"best_metric", r.best_metric},
          {"best_step", r.best_step},
          {"nodes", r.nodes},
          {"wall_seconds", r.wall_seconds}};
}

// ---------------------------------------------------------------------------
// Commands.

json run_regression(const RegressionTask& task, const NetworkSpec& spec, const TrainSection& train_cfg,
                    const fs::path& curve_path, bool verbose, Network* trained = nullptr) {
  Network net(spec);
  TaskSampler sampler(task, train_cfg.seeds.train);
  const Dataset test = sample_dataset(task, train_cfg.seeds.test, train_cfg.test_samples);
  CurveWriter curve(curve_path, "test_rmse", verbose, task.name);
  const TrainReport report = train(net, sampler, test, train_cfg.cfg, std::ref(curve));
  json out = report_json(report);
  out["name"] = task.name;
  out["expression"] = task.expression.to_string();
  out["dim"] = task.dim;
  out["redrawn"] = sampler.redrawn();
  out["curve"] = curve_path.filename().string();
  if (trained != nullptr) *trained = std::move(net);
  return out;
}

json common_summary(std::string_view kind, const json& config) {
  return {{"experiment", std::string(kind)}, {"config", config}};
}

json cmd_fit1d(const json& root, const fs::path& out, const fs::path& base, bool verbose) {
  const auto tasks = select_tasks(root, base);
  if (tasks.size() != 1 || tasks[0].dim != 1) fail(ErrorKind::kConfig, "fit1d needs exactly one 1-D task");
  const RegressionTask& task = tasks[0];
  const TrainSection t = parse_train(root.value("train", json::object()));
  const NetworkSpec spec = parse_network(root.value("network", json::object()), 1, 1, {}, ResidualMode::kNone,
                                         CodecConfig::float754());
  if (spec.widths.size() != 2) fail(ErrorKind::kConfig, "fit1d trains a single tree; drop network.hidden");
  Network net(spec);
  json summary = run_regression(task, spec, t, out / "curve.csv", verbose, &net);

  const int grid = get_or<int>(root.value("fit1d", json::object()), "grid", 1000);
  if (grid < 2) fail(ErrorKind::kConfig, "fit1d.grid must be >= 2");
  std::ostringstream csv;
  csv << "x,f,model,df,dmodel\n";
  const double lo = task.lower[0], hi = task.upper[0];
  for (int k = 0; k < grid; ++k) {
    const double x = lo + (hi - lo) * (k + 0.5) / grid;
    const double h = 1e-6 * std::max(1.0, std::fabs(x));
    const double xs[1] = {x}, xp[1] = {x + h}, xm[1] = {x - h};
    const double f = task.expression.evaluate(xs);
    const double df = (task.expression.evaluate(xp) - task.expression.evaluate(xm)) / (2 * h);
    csv << format_double(x) << ',' << format_double(f) << ',' << format_double(net.predict(xs)[0]) << ','
        << format_double(df) << ',' << format_double(net.model_derivative(xs, 0)[0]) << '\n';
  }
  write_text(out / "fit.csv", csv.str());
  write_bytes(out / "model.shpt", net.tree(0, 0).serialize());
  summary["model"] = "model.shpt";
  return summary;
}

json cmd_kan(const json& root, const fs::path& out, const fs::path& base, bool verbose) {
  const auto tasks = select_tasks(root, base);
  if (tasks.size() != 1) fail(ErrorKind::kConfig, "kan trains one task; use 'tasks' with a single name or 'task'");
  const TrainSection t = parse_train(root.value("train", json::object()));
  const NetworkSpec spec = parse_network(root.value("network", json::object()), tasks[0].dim, 1, {5, 5},
                                         ResidualMode::kIdentity, CodecConfig::float754());
  Network net(spec);
  json summary = run_regression(tasks[0], spec, t, out / "curve.csv", verbose, &net);
  write_bytes(out / "model.shkn", net.serialize());
  summary["model"] = "model.shkn";
  return summary;
}

json cmd_suite(const json& root, const fs::path& out, const fs::path& base, bool verbose) {
  const auto tasks = select_tasks(root, base);
  const TrainSection t = parse_train(root.value("train", json::object()));
  json results = json::array();
  std::ostringstream table;
  table << "name,dim,initial_test_rmse,best_test_rmse,final_test_rmse,nodes,skipped\n";
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const NetworkSpec spec = parse_network(root.value("network", json::object()), tasks[k].dim, 1, {5, 5},
                                           ResidualMode::kIdentity, CodecConfig::float754());
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%02zu_", k);
    const fs::path curve = out / "curves" / (prefix + safe_name(tasks[k].name) + ".csv");
    json r = run_regression(tasks[k], spec, t, curve, verbose);
    r["curve"] = "curves/" + curve.filename().string();
    table << tasks[k].name << ',' << tasks[k].dim << ',' << format_double(r["initial_metric"].get<double>()) << ','
          << format_double(r["best_metric"].get<double>()) << ',' << format_double(r["final_metric"].get<double>())
          << ',' << r["nodes"].get<std::size_t>() << ',' << r["skipped"].get<std::uint64_t>() << '\n';
    results.push_back(std::move(r));
  }
  write_text(out / "summary.csv", table.str());
  return {{"tasks", results}};
}

json cmd_mnist(const json& root, const fs::path& out, const fs::path& base, bool verbose) {
  const json section = root.value("mnist", json::object());
  check_keys(section, "mnist", {"dir", "epochs", "train_limit", "test_limit"});
  const fs::path dir = resolve(get_or<std::string>(section, "dir", "data/mnist"), base);
  auto [train_set, test_set] = load_mnist(dir);
  Dataset train_data = train_set.to_dataset();
  Dataset test_data = test_set.to_dataset();
  auto limit = [](Dataset& d, std::size_t n) {
    if (n == 0 || n >= d.size()) return;
    d.inputs.resize(n * static_cast<std::size_t>(d.in_dim));
    d.targets.resize(n * static_cast<std::size_t>(d.out_dim));
    d.labels.resize(n);
  };
  limit(train_data, get_or<std::size_t>(section, "train_limit", 0));
  limit(test_data, get_or<std::size_t>(section, "test_limit", 0));

  const json train_section = root.value("train", json::object());
  TrainSection t = parse_train(train_section);
  // Hidden activations of exactly zero sit where the float codec's slope is ~2^1011, so the
  // first backward pass overflows; start from small random biases instead.
  if (!train_section.contains("init_scale")) t.cfg.init_scale = 0.1;
  const auto epochs = get_or<std::uint64_t>(section, "epochs", 30);
  if (!t.samples_given) t.cfg.samples = epochs * train_data.size();
  if (t.cfg.eval_interval == 0) t.cfg.eval_interval = train_data.size();
  t.cfg.metric = Metric::kAccuracy;
  const NetworkSpec spec = parse_network(root.value("network", json::object()), train_data.in_dim, 10, {10},
                                         ResidualMode::kNone, CodecConfig::fixed(8));
  Network net(spec);
  EpochSource source(train_data, t.seeds.train);
  CurveWriter curve(out / "curve.csv", "test_accuracy", verbose, "mnist");
  const TrainReport report = train(net, source, test_data, t.cfg, std::ref(curve));
  write_bytes(out / "model.shkn", net.serialize());
  json summary = report_json(report);
  summary["train_size"] = train_data.size();
  summary["test_size"] = test_data.size();
  summary["epochs"] = static_cast<double>(t.cfg.samples) / static_cast<double>(train_data.size());
  summary["model"] = "model.shkn";
  summary["curve"] = "curve.csv";
  return summary;
}

json cmd_bench(const json& root, const fs::path& out) {
  const json section = root.value("bench", json::object());
  check_keys(section, "bench",
             {"key_sweep_precision", "key_counts", "precision_sweep_keys", "precisions", "measured_updates", "seed"});
  BenchConfig cfg;
  cfg.key_sweep_precision = get_or<int>(section, "key_sweep_precision", cfg.key_sweep_precision);
  cfg.key_counts = get_or<std::vector<std::uint64_t>>(section, "key_counts", cfg.key_counts);
  cfg.precision_sweep_keys = get_or<std::uint64_t>(section, "precision_sweep_keys", cfg.precision_sweep_keys);
  cfg.precisions = get_or<std::vector<int>>(section, "precisions", cfg.precisions);
  cfg.measured_updates = get_or<std::uint64_t>(section, "measured_updates", cfg.measured_updates);
  cfg.seed = get_or<std::uint64_t>(section, "seed", cfg.seed);
  const auto rows = run_bench(cfg);
  std::ostringstream csv;
  csv << "sweep,precision,keys,updates,mean_nodes,mean_bits,ns_per_update\n";
  for (const auto& r : rows)
    csv << r.sweep << ',' << r.precision << ',' << r.keys << ',' << r.updates << ',' << format_double(r.mean_nodes)
        << ',' << format_double(r.mean_bits) << ',' << format_double(r.ns_per_update) << '\n';
  write_text(out / "bench.csv", csv.str());

  std::vector<double> log_n, nodes_n, p, nodes_p;
  for (const auto& r : rows) {
    if (r.sweep == "keys") {
      log_n.push_back(std::log2(static_cast<double>(r.keys)));
      nodes_n.push_back(r.mean_nodes);
    } else {
      p.push_back(r.precision);
      nodes_p.push_back(r.mean_nodes);
    }
  }
  json summary = {{"bench", "bench.csv"}, {"rows", rows.size()}};
  if (log_n.size() >= 2) {
    const LinearFit f = fit_line(log_n, nodes_n);
    summary["keys_log_fit"] = {{"intercept", f.intercept}, {"slope", f.slope}, {"r_squared", f.r_squared}};
  }
  if (p.size() >= 2) {
    const LinearFit f = fit_line(p, nodes_p);
    summary["precision_linear_fit"] = {{"intercept", f.intercept}, {"slope", f.slope}, {"r_squared", f.r_squared}};
  }
  return summary;
}

}  // namespace

std::string run_experiment(std::string_view kind, std::string_view config_json, const fs::path& output_dir,
                           const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(config_json.empty() ? std::string_view("{}") : config_json);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "run config",
             {"experiment", "network", "train", "task", "catalog", "tasks", "fit1d", "mnist", "bench", "output_dir",
              "verbose"});
  if (root.contains("experiment") && root.at("experiment") != kind)
    fail(ErrorKind::kConfig, "config is for experiment '" + root.at("experiment").get<std::string>() + "'");
  const bool verbose = get_or<bool>(root, "verbose", false);
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create output directory " + output_dir.string() + ": " + ec.message());

  json summary = common_summary(kind, root);
  json result;
  if (kind == "fit1d") {
    result = cmd_fit1d(root, output_dir, base_dir, verbose);
  } else if (kind == "kan") {
    result = cmd_kan(root, output_dir, base_dir, verbose);
  } else if (kind == "suite") {
    result = cmd_suite(root, output_dir, base_dir, verbose);
  } else if (kind == "mnist") {
    result = cmd_mnist(root, output_dir, base_dir, verbose);
  } else if (kind == "bench") {
    result = cmd_bench(root, output_dir);
  } else {
    fail(ErrorKind::kConfig, "unknown experiment '" + std::string(kind) + "'");
  }
  summary["result"] = result;
  const std::string text = summary.dump(2) + "\n";
  write_text(output_dir / "summary.json", text);
  return text;
}

std::string inspect_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open model " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() < 4) fail(ErrorKind::kData, "truncated model data");
  const std::string tag(bytes.begin(), bytes.begin() + 4);

  auto tree_json = [](const PatriciaTree& t) {
    return json{{"nodes", t.node_count()},           {"max_depth", t.max_depth()},
                {"levels", t.level_histogram()},     {"memory_bytes", t.memory_bytes()},
                {"precision", t.precision()},        {"out_dim", t.out_dim()},
                {"invariants_ok", t.check_invariants()}};
  };
  json out;
  if (tag == "SHPT") {
    out = tree_json(PatriciaTree::deserialize(bytes));
    out["kind"] = "tree";
  } else if (tag == "SHKN") {
    const Network net = Network::deserialize(bytes);
    out["kind"] = "network";
    out["widths"] = net.spec().widths;
    out["residual"] = std::string(to_string(net.spec().residual));
    out["nodes"] = net.node_count();
    out["memory_bytes"] = net.memory_bytes();
    json layers = json::array();
    for (int l = 0; l < net.layer_count(); ++l) {
      json trees = json::array();
      for (int i = 0; i < net.spec().widths[static_cast<std::size_t>(l)]; ++i) trees.push_back(tree_json(net.tree(l, i)));
      layers.push_back({{"codec", std::string(to_string(net.spec().layers[static_cast<std::size_t>(l)].codec.kind))},
                        {"trees", trees}});
    }
    out["layers"] = layers;
  } else {
    fail(ErrorKind::kData, "unrecognized model file " + path.string());
  }
  return out.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
  if (cfg.measured_updates == 0) fail(ErrorKind::kConfig, "bench.measured_updates must be > 0");
  std::vector<BenchRow> rows;
  auto measure = [&](const std::string& sweep, int precision, std::uint64_t keys) {
    if (precision < 1 || precision > 64) fail(ErrorKind::kConfig, "bench precision must be 1..64");
    PatriciaTree tree(BasisProfile::uniform(BasisKind::kSlash, precision, 0.5), 1);
    std::mt19937_64 rng(cfg.seed);
    auto draw = [&] {
      const std::uint64_t bits = precision == 64 ? rng() : rng() >> (64 - precision);
      return UnitCode{std::ldexp(static_cast<double>(bits), -precision), bits, precision};
    };
    const double delta[1] = {1e-3};
    for (std::uint64_t k = 0; k < keys; ++k) tree.update(draw(), delta, 1.0);
    BenchRow row;
    row.sweep = sweep;
    row.precision = precision;
    row.keys = keys;
    row.updates = cfg.measured_updates;
    std::vector<UnitCode> codes(cfg.measured_updates);
    for (auto& c : codes) c = draw();
    PathCost total;
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& c : codes) {
      PathCost cost;
      tree.update(c, delta, 1.0, &cost);
      total.nodes += cost.nodes;
      total.bits += cost.bits;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.mean_nodes = static_cast<double>(total.nodes) / static_cast<double>(cfg.measured_updates);
    row.mean_bits = static_cast<double>(total.bits) / static_cast<double>(cfg.measured_updates);
    row.ns_per_update = seconds * 1e9 / static_cast<double>(cfg.measured_updates);
    rows.push_back(row);
  };
  for (auto n : cfg.key_counts) measure("keys", cfg.key_sweep_precision, n);
  for (int p : cfg.precisions) measure("precision", p, cfg.precision_sweep_keys);
  return rows;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) fail(ErrorKind::kInvalidArgument, "fit needs at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxx == 0 ? 0.0 : sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += e * e;
  }
  f.r_squared = syy == 0 ? 1.0 : 1.0 - ss_res / syy;
  return f;
}

}  // namespace shkan
