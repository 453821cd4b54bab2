#include "shkan/datasets.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "shkan/error.hpp"

namespace shkan {

namespace {

constexpr std::uint64_t kRedrawLimit = 1'000'000;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(sep, start);
    out.push_back(trim(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start)));
    if (at == std::string_view::npos) return out;
    start = at + 1;
  }
}

double parse_double(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) fail(ErrorKind::kConfig, where + ": expected a number, got '" + text + "'");
  return v;
}

// Uniform in (0,1) with 53 significant bits, never 0 or 1.
double open_unit(std::mt19937_64& rng) {
  const std::uint64_t k = rng() >> 12;
  return std::ldexp(static_cast<double>(2 * k + 1), -53);
}

}  // namespace

RegressionTask RegressionTask::make(std::string name, const std::string& expression, int dim, double lo, double hi) {
  RegressionTask task;
  task.name = std::move(name);
  task.expression = Expression::parse(expression);
  task.dim = dim;
  task.lower.assign(static_cast<std::size_t>(std::max(dim, 0)), lo);
  task.upper.assign(static_cast<std::size_t>(std::max(dim, 0)), hi);
  task.validate();
  return task;
}

void RegressionTask::validate() const {
  if (dim < 1) fail(ErrorKind::kConfig, "task '" + name + "': dimension must be >= 1");
  if (expression.arity() > dim)
    fail(ErrorKind::kConfig, "task '" + name + "': expression uses x" + std::to_string(expression.arity()) +
                                 " but the dimension is " + std::to_string(dim));
  if (lower.size() != static_cast<std::size_t>(dim) || upper.size() != static_cast<std::size_t>(dim))
    fail(ErrorKind::kConfig, "task '" + name + "': domain box does not match the dimension");
  for (int i = 0; i < dim; ++i) {
    const double lo = lower[static_cast<std::size_t>(i)], hi = upper[static_cast<std::size_t>(i)];
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      fail(ErrorKind::kConfig, "task '" + name + "': domain bounds must be finite with lower < upper");
  }
}

std::vector<RegressionTask> parse_catalog(std::string_view text) {
  std::vector<RegressionTask> tasks;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const std::string where = "catalog line " + std::to_string(line_no);
    const auto fields = split(line, '|');
    if (fields.size() < 3 || fields.size() > 4)
      fail(ErrorKind::kConfig, where + ": expected 'name | expression | dim [| lo,hi]'");
    if (fields[0].empty()) fail(ErrorKind::kConfig, where + ": empty task name");
    const double dim = parse_double(fields[2], where);
    if (dim != std::floor(dim) || dim < 1 || dim > 1024) fail(ErrorKind::kConfig, where + ": bad dimension");
    double lo = 0.1, hi = 0.9;
    if (fields.size() == 4) {
      const auto bounds = split(fields[3], ',');
      if (bounds.size() != 2) fail(ErrorKind::kConfig, where + ": domain must be 'lo,hi'");
      lo = parse_double(bounds[0], where);
      hi = parse_double(bounds[1], where);
    }
    try {
      tasks.push_back(RegressionTask::make(fields[0], fields[1], static_cast<int>(dim), lo, hi));
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, where + ": " + e.what());
    }
  }
  return tasks;
}

std::vector<RegressionTask> load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open catalog " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_catalog(buf.str());
}

TaskSampler::TaskSampler(const RegressionTask& task, std::uint64_t seed) : task_(&task), rng_(seed) { task.validate(); }

void TaskSampler::next(std::span<double> x, std::span<double> target) {
  const auto n = static_cast<std::size_t>(task_->dim);
  if (x.size() != n || target.size() != 1) fail(ErrorKind::kInvalidArgument, "sample buffer shape mismatch");
  for (std::uint64_t attempt = 0; attempt < kRedrawLimit; ++attempt) {
    bool inside = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double lo = task_->lower[i], hi = task_->upper[i];
      x[i] = lo + (hi - lo) * open_unit(rng_);
      inside = inside && x[i] > lo && x[i] < hi;
    }
    if (!inside) continue;
    const double t = task_->expression.evaluate(x);
    if (std::isfinite(t)) {
      target[0] = t;
      return;
    }
    ++redrawn_;
  }
  fail(ErrorKind::kData, "degenerate task '" + task_->name + "'");
}

Dataset sample_dataset(const RegressionTask& task, std::uint64_t seed, std::size_t count) {
  TaskSampler sampler(task, seed);
  Dataset data;
  data.in_dim = task.dim;
  data.out_dim = 1;
  data.inputs.resize(count * static_cast<std::size_t>(task.dim));
  data.targets.resize(count);
  for (std::size_t s = 0; s < count; ++s)
    sampler.next(std::span<double>(data.inputs).subspan(s * static_cast<std::size_t>(task.dim),
                                                        static_cast<std::size_t>(task.dim)),
                 std::span<double>(data.targets).subspan(s, 1));
  return data;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kData, path.string() + ": missing file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t big_endian(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

}  // namespace

Dataset MnistSet::to_dataset() const {
  Dataset data;
  data.in_dim = rows * cols;
  data.out_dim = 10;
  data.inputs = images;
  data.targets.assign(size() * 10, 0.0);
  for (std::size_t s = 0; s < size(); ++s) data.targets[s * 10 + static_cast<std::size_t>(labels[s])] = 1.0;
  data.labels = labels;
  return data;
}

MnistSet load_mnist_pair(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  if (img.size() < 16) fail(ErrorKind::kData, images.string() + ": truncation in header");
  if (lab.size() < 8) fail(ErrorKind::kData, labels.string() + ": truncation in header");
  if (big_endian(img, 0) != 0x00000803) fail(ErrorKind::kData, images.string() + ": bad magic");
  if (big_endian(lab, 0) != 0x00000801) fail(ErrorKind::kData, labels.string() + ": bad magic");
  const std::size_t count = big_endian(img, 4);
  MnistSet set;
  set.rows = static_cast<int>(big_endian(img, 8));
  set.cols = static_cast<int>(big_endian(img, 12));
  if (set.rows < 1 || set.cols < 1 || set.rows > 4096 || set.cols > 4096)
    fail(ErrorKind::kData, images.string() + ": bad image dimensions");
  if (big_endian(lab, 4) != count) fail(ErrorKind::kData, "image and label counts differ");
  const std::size_t pixels = static_cast<std::size_t>(set.rows) * static_cast<std::size_t>(set.cols);
  if (img.size() < 16 + count * pixels) fail(ErrorKind::kData, images.string() + ": truncation");
  if (lab.size() < 8 + count) fail(ErrorKind::kData, labels.string() + ": truncation");
  set.images.resize(count * pixels);
  for (std::size_t k = 0; k < count * pixels; ++k) set.images[k] = img[16 + k] / 255.0;
  set.labels.resize(count);
  for (std::size_t s = 0; s < count; ++s) {
    const int label = lab[8 + s];
    if (label > 9) fail(ErrorKind::kData, labels.string() + ": label out of range (" + std::to_string(label) + ")");
    set.labels[s] = label;
  }
  return set;
}

std::pair<MnistSet, MnistSet> load_mnist(const std::filesystem::path& dir) {
  return {load_mnist_pair(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte"),
          load_mnist_pair(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte")};
}

EpochSource::EpochSource(const Dataset& data, std::uint64_t seed) : data_(&data), rng_(seed) {
  if (data.size() == 0) fail(ErrorKind::kData, "cannot train on an empty dataset");
  order_.resize(data.size());
  cursor_ = order_.size();
}

void EpochSource::next(std::span<double> x, std::span<double> target) {
  if (cursor_ == order_.size()) {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }
  const std::size_t s = order_[cursor_++];
  const auto in = data_->input(s);
  const auto t = data_->target(s);
  std::copy(in.begin(), in.end(), x.begin());
  std::copy(t.begin(), t.end(), target.begin());
}

}  // namespace shkan
