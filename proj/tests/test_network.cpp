#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "shkan/datasets.hpp"
#include "shkan/error.hpp"
#include "shkan/network.hpp"

using namespace shkan;

namespace {

const CodecConfig kFloat = CodecConfig::float754();

class ListSource : public SampleSource {
 public:
  explicit ListSource(std::vector<std::pair<double, double>> samples) : samples_(std::move(samples)) {}
  void next(std::span<double> x, std::span<double> t) override {
    const auto& s = samples_[k_++ % samples_.size()];
    x[0] = s.first;
    t[0] = s.second;
  }

 private:
  std::vector<std::pair<double, double>> samples_;
  std::size_t k_ = 0;
};

Network trained_net(std::uint64_t seed, std::uint64_t samples) {
  Network net(NetworkSpec::uniform({2, 3, 1}, ResidualMode::kIdentity, kFloat));
  const auto task = RegressionTask::make("t", "sin(3*x1)*x2 + x1", 2);
  TaskSampler source(task, seed);
  std::vector<double> x(2), t(1);
  for (std::uint64_t s = 0; s < samples; ++s) {
    source.next(x, t);
    net.train_step(x, t, 1.0, StepRule::kNormalized);
  }
  return net;
}

}  // namespace

TEST_SUITE("network") {
  TEST_CASE("untrained networks") {
    const Network plain(NetworkSpec::uniform({3, 4, 2}, ResidualMode::kNone, kFloat));
    CHECK(plain.predict(std::vector<double>{0.3, -2.0, 7.0}) == std::vector<double>{0.0, 0.0});
    const Network skip(NetworkSpec::uniform({2, 1}, ResidualMode::kIdentity, kFloat));
    CHECK(skip.predict(std::vector<double>{0.25, 1.5})[0] == 1.75);
    CHECK(plain.model_derivative(std::vector<double>{0.3, 0.1, 0.2}, 1) == std::vector<double>{0.0, 0.0});
    const Network one(NetworkSpec::uniform({1, 1}, ResidualMode::kIdentity, kFloat));
    CHECK(one.model_derivative(std::vector<double>{0.4}, 0)[0] == 1.0);
  }

  TEST_CASE("spec validation") {
    CHECK_THROWS_AS(Network(NetworkSpec::uniform({3}, ResidualMode::kNone, kFloat)), Error);
    CHECK_THROWS_AS(Network(NetworkSpec::uniform({3, 0, 1}, ResidualMode::kNone, kFloat)), Error);
    NetworkSpec bad = NetworkSpec::uniform({1, 1}, ResidualMode::kNone, kFloat);
    bad.layers[0].profile = BasisProfile::uniform(BasisKind::kSlash, 10, 0.5);
    CHECK_THROWS_AS(Network{bad}, Error);
  }

  TEST_CASE("single layer matches a bare tree") {
    for (const CodecConfig& codec : {kFloat, CodecConfig::fixed(16)}) {
      Network net(NetworkSpec::uniform({1, 1}, ResidualMode::kNone, codec));
      PatriciaTree tree(default_profile(codec), 1);
      std::mt19937_64 rng(3);
      std::uniform_real_distribution<double> draw(0.0, 0.99);
      for (int s = 0; s < 2000; ++s) {
        const double x = draw(rng), t = std::sin(7 * x);
        const double y = tree.predict(encode(x, codec)).y[0];
        const std::vector<double> xs{x}, ts{t};
        CHECK(net.predict(xs)[0] == y);
        net.train_step(xs, ts, 1.0, StepRule::kNormalized);
        if (t != y) tree.update(encode(x, codec), std::vector<double>{t - y}, 1.0);
      }
      for (int s = 0; s < 200; ++s) {
        const double x = draw(rng);
        CHECK(net.predict(std::vector<double>{x})[0] == tree.predict(encode(x, codec)).y[0]);
      }
    }
  }

  TEST_CASE("a step at the target leaves the network unchanged") {
    Network net = trained_net(5, 300);
    const std::vector<double> x{0.3, 0.6};
    const auto before = net.serialize();
    const auto y = net.predict(x);
    const StepResult r = net.train_step(x, y, 1.0, StepRule::kNormalized);
    CHECK(r.outcome == StepOutcome::kUnchanged);
    CHECK(net.serialize() == before);
  }

  TEST_CASE("one step shrinks the error at the sample") {
    Network net(NetworkSpec::uniform({1, 1}, ResidualMode::kNone, CodecConfig::fixed(16)));
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> draw(0.0, 1.0);
    for (int s = 0; s < 500; ++s) {
      const std::vector<double> x{draw(rng)}, t{std::cos(5 * x[0])};
      const double before = std::fabs(t[0] - net.predict(x)[0]);
      net.train_step(x, t, 1.0, StepRule::kPlain);
      CHECK(std::fabs(t[0] - net.predict(x)[0]) <= before + 1e-15);
    }
  }

  TEST_CASE("errors reach the first layer with unit factor through zero trees") {
    Network net(NetworkSpec::uniform({1, 2, 1}, ResidualMode::kIdentity, kFloat));
    const std::vector<double> x{0.5}, t{3.0};
    const double delta = t[0] - net.predict(x)[0];
    CHECK(delta == 2.0);  // 0.5 reaches the output along two residual paths
    net.train_step(x, t, 1.0, StepRule::kPlain);
    const double gain = net.tree(0, 0).profile().update_gain();
    CHECK(net.tree(1, 0).bias()[0] == doctest::Approx(gain * delta).epsilon(1e-15));
    CHECK(net.tree(1, 1).bias()[0] == doctest::Approx(gain * delta).epsilon(1e-15));
    CHECK(net.tree(0, 0).bias()[0] == doctest::Approx(gain * delta).epsilon(1e-15));
    CHECK(net.tree(0, 0).bias()[1] == doctest::Approx(gain * delta).epsilon(1e-15));
  }

  TEST_CASE("normalized step divides by the first-order output response") {
    // [1,2,1] with zero trees: responses are 2 * 1 (top layer) + 1 * |(d, d)|^2 / d^2 = 4.
    Network plain(NetworkSpec::uniform({1, 2, 1}, ResidualMode::kIdentity, kFloat));
    Network scaled(NetworkSpec::uniform({1, 2, 1}, ResidualMode::kIdentity, kFloat));
    const std::vector<double> x{0.5}, t{3.0};
    plain.train_step(x, t, 0.25, StepRule::kPlain);
    scaled.train_step(x, t, 1.0, StepRule::kNormalized);
    CHECK(plain.serialize() == scaled.serialize());
  }

  TEST_CASE("model derivative matches finite differences away from cell edges") {
    const Network net = trained_net(11, 20000);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> draw(0.15, 0.85);
    int checked = 0;
    for (int k = 0; k < 400; ++k) {
      std::vector<double> x{draw(rng), draw(rng)};
      const int i = k % 2;
      const double h = 1e-7;
      ForwardTape a, b, c;
      std::vector<double> xp = x, xm = x;
      xp[static_cast<std::size_t>(i)] += h;
      xm[static_cast<std::size_t>(i)] -= h;
      net.forward(x, a, ForwardMode::kEvaluate);
      net.forward(xp, b, ForwardMode::kEvaluate);
      net.forward(xm, c, ForwardMode::kEvaluate);
      bool same_cells = true;
      for (std::size_t l = 0; l < a.layers.size(); ++l)
        for (std::size_t j = 0; j < a.layers[l].codes.size(); ++j)
          same_cells = same_cells && a.layers[l].codes[j].bits == b.layers[l].codes[j].bits &&
                       a.layers[l].codes[j].bits == c.layers[l].codes[j].bits;
      if (!same_cells) continue;
      const double fd = (b.output[0] - c.output[0]) / (2 * h);
      const double exact = net.model_derivative(x, i)[0];
      CHECK(std::fabs(fd - exact) <= 1e-3 * std::max(std::fabs(exact), 1e-3));
      ++checked;
    }
    CHECK(checked > 100);
  }

  TEST_CASE("training is deterministic and parallel predicts change nothing") {
    const auto task = RegressionTask::make("t", "x1*x2", 2);
    const Dataset test = sample_dataset(task, 7, 200);
    TrainConfig cfg;
    cfg.samples = 3000;
    cfg.init_scale = 0.1;
    std::vector<std::vector<std::uint8_t>> models;
    std::vector<std::vector<double>> curves;
    for (bool parallel : {false, false, true}) {
      Network net(NetworkSpec::uniform({2, 5, 5, 1}, ResidualMode::kIdentity, kFloat));
      TaskSampler source(task, 8);
      cfg.parallel = parallel;
      const TrainReport r = train(net, source, test, cfg);
      models.push_back(net.serialize());
      std::vector<double> c;
      for (const auto& p : r.curve) c.push_back(p.test_metric);
      curves.push_back(c);
    }
    CHECK(models[0] == models[1]);
    CHECK(models[0] == models[2]);
    CHECK(curves[0] == curves[2]);
  }

  TEST_CASE("infinite intermediates skip the sample and keep the accounting") {
    const double inf = std::numeric_limits<double>::infinity();
    ListSource source({{0.3, 1.0}, {inf, 2.0}, {0.6, -1.0}, {-inf, 0.0}});
    Network net(NetworkSpec::uniform({1, 2, 1}, ResidualMode::kIdentity, kFloat));
    Dataset test;
    TrainConfig cfg;
    cfg.samples = 101;
    const TrainReport r = train(net, source, test, cfg);
    CHECK(r.presented == 101);
    CHECK(r.skipped == 50);
    CHECK(r.processed + r.skipped == r.presented);
    CHECK(std::isfinite(net.predict(std::vector<double>{inf})[0]) == false);
  }

  TEST_CASE("NaN aborts training unless configured to skip") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Network net(NetworkSpec::uniform({1, 1}, ResidualMode::kNone, kFloat));
    Dataset test;
    TrainConfig cfg;
    cfg.samples = 10;
    ListSource bad({{0.5, 1.0}, {nan, 1.0}});
    try {
      train(net, bad, test, cfg);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kNumeric);
    }
    cfg.abort_on_nan = false;
    ListSource again({{0.5, 1.0}, {nan, 1.0}});
    const TrainReport r = train(net, again, test, cfg);
    CHECK(r.skipped == 5);
  }

  TEST_CASE("network serialization round-trips") {
    const Network net = trained_net(21, 2000);
    const auto bytes = net.serialize();
    const Network back = Network::deserialize(bytes);
    CHECK(back.spec() == net.spec());
    CHECK(back.serialize() == bytes);
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> draw(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
      const std::vector<double> x{draw(rng), draw(rng)};
      CHECK(back.predict(x) == net.predict(x));
    }
    auto broken = bytes;
    broken[broken.size() / 3] ^= 1;
    CHECK_THROWS_AS(Network::deserialize(broken), Error);
    broken = bytes;
    broken.resize(bytes.size() / 2);
    CHECK_THROWS_AS(Network::deserialize(broken), Error);
  }

  TEST_CASE("evaluation metrics") {
    const auto task = RegressionTask::make("t", "sin(5*x1)", 1);
    const Dataset data = sample_dataset(task, 4, 500);
    const Network zero(NetworkSpec::uniform({1, 1}, ResidualMode::kNone, kFloat));
    double sum = 0.0;
    for (double t : data.targets) sum += t * t;
    CHECK(evaluate_rmse(zero, data) == doctest::Approx(std::sqrt(sum / 500)).epsilon(1e-14));

    Dataset labelled;
    labelled.in_dim = 1;
    labelled.out_dim = 3;
    labelled.inputs = {0.1, 0.2, 0.3};
    labelled.targets.assign(9, 0.0);
    labelled.labels = {0, 2, 1};
    const Network flat(NetworkSpec::uniform({1, 3}, ResidualMode::kNone, kFloat));
    CHECK(evaluate_accuracy(flat, labelled) == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("checkpoint cadence is log-spaced") {
    TrainConfig cfg;
    for (std::uint64_t s = 1; s <= 10; ++s) CHECK(is_checkpoint(s, cfg));
    CHECK(is_checkpoint(20, cfg));
    CHECK(is_checkpoint(15, cfg));
    CHECK(is_checkpoint(150, cfg));
    CHECK_FALSE(is_checkpoint(155, cfg));
    CHECK(is_checkpoint(110, cfg));
    CHECK_FALSE(is_checkpoint(105, cfg));
    CHECK(is_checkpoint(2'000'000, cfg));
    CHECK_FALSE(is_checkpoint(2'050'000, cfg));
    cfg.eval_interval = 7;
    CHECK(is_checkpoint(14, cfg));
    CHECK_FALSE(is_checkpoint(10, cfg));
  }

  TEST_CASE("training reports") {
    const auto task = RegressionTask::make("t", "sin(x1*pi*2)", 1, 0.0, 1.0);
    const Dataset test = sample_dataset(task, 2, 1000);
    NetworkSpec spec = NetworkSpec::uniform({1, 1}, ResidualMode::kNone, CodecConfig::fixed(16));
    SUBCASE("zero samples") {
      Network net(spec);
      TaskSampler source(task, 1);
      TrainConfig cfg;
      cfg.samples = 0;
      const TrainReport r = train(net, source, test, cfg);
      REQUIRE(r.curve.size() == 1);
      CHECK(r.curve[0].step == 0);
      CHECK(r.initial_metric == r.final_metric);
    }
    SUBCASE("learning lowers the test error") {
      Network net(spec);
      TaskSampler source(task, 1);
      TrainConfig cfg;
      cfg.samples = 100000;
      const TrainReport r = train(net, source, test, cfg);
      CHECK(r.best_metric < 0.1 * r.initial_metric);
      CHECK(r.curve.back().step == 100000);
    }
  }
}
