#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "dcnmt/error.hpp"
#include "dcnmt/pipeline.hpp"
#include "dcnmt/trainer.hpp"
#include "tiny.hpp"

using namespace dcnmt;

namespace {

struct OverfitTask {
  Model model;
  std::vector<AnnotatedPair> data;
  std::vector<int> src, tgt;
};

OverfitTask overfit_task(std::uint64_t seed = 1) {
  const std::vector<std::vector<std::string>> sides = {{"a", "b", "c", "d", "e"}, {"x", "y", "z", "w"}};
  ModelConfig mc;
  mc.vocab = Vocabulary::build(sides, 100);
  mc.tags = DomainTagSet({"A"});
  mc.mode = Mode::join;
  mc.word_dim = 16;
  mc.hidden_dim = 16;
  mc.num_layers = 1;
  mc.dropout_p = 0.0;
  const std::vector<LabeledPair> pairs = {{"A", sides[0], sides[1], {}}};
  auto data = prepare_pairs(pairs, Mode::join, mc.vocab, mc.tags);
  return {Model::create(mc, seed), data, mc.vocab.encode(sides[0]), mc.vocab.encode(sides[1])};
}

std::vector<AnnotatedPair> small_corpus(std::size_t n, Mode mode) {
  std::vector<AnnotatedPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    AnnotatedPair p;
    const int d = static_cast<int>(i % 3);
    for (std::size_t t = 0; t < 2 + i % 4; ++t) p.src.push_back(4 + static_cast<int>((i + t) % 12));
    p.src.push_back(Vocabulary::kEos);
    for (std::size_t t = 0; t < 1 + i % 3; ++t) p.tgt.push_back(4 + static_cast<int>((2 * i + t) % 12));
    p.tgt.push_back(Vocabulary::kEos);
    p.domain = d;
    if (mode == Mode::feature) p.src_features.assign(p.src.size(), d);
    out.push_back(p);
  }
  return out;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dcnmt_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("lr_schedule") {
  const TrainConfig cfg;
  CHECK(lr_schedule(5, cfg) == 1.0);
  CHECK(lr_schedule(10, cfg) == 1.0);
  CHECK(lr_schedule(11, cfg) == 0.5);
  CHECK(lr_schedule(12, cfg) == 0.25);
  CHECK(lr_schedule(18, cfg) == std::ldexp(1.0, -8));
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.decay_factor = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.decay_factor = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("make_batches sizes, coverage and determinism") {
  const auto data = small_corpus(10, Mode::join);
  const auto batches = make_batches(std::span<const AnnotatedPair>(data), 3, 7);
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> seen;
  for (const auto& b : batches) {
    sizes.push_back(b.size());
    seen.insert(seen.end(), b.begin(), b.end());
  }
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  CHECK(sizes == std::vector<std::size_t>{3, 3, 3, 1});
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(seen[i] == i);

  CHECK(make_batches(std::span<const AnnotatedPair>(data), 3, 7) == batches);
  CHECK_THROWS_AS(make_batches(std::span<const AnnotatedPair>{}, 3, 7), InputError);

  bool differs = false;
  for (std::uint64_t s = 8; s < 20 && !differs; ++s)
    differs = make_batches(std::span<const AnnotatedPair>(data), 3, s) != batches;
  CHECK(differs);
}

TEST_CASE("per-epoch streams are distinct") {
  CHECK(epoch_shuffle_seed(1, 1) != epoch_dropout_seed(1, 1));
  CHECK(epoch_shuffle_seed(1, 1) != epoch_shuffle_seed(1, 2));
  CHECK(epoch_shuffle_seed(1, 3) == epoch_shuffle_seed(1, 3));
}

TEST_CASE("single-pair overfit") {
  OverfitTask task = overfit_task();
  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.epochs = 200;
  cfg.decay_start_epoch = 1000;
  const auto reports = train(task.model, task.data, cfg);
  REQUIRE(reports.size() == 200);
  CHECK(reports.back().perplexity < 1.05);
  CHECK(greedy_decode(task.model, task.src, std::nullopt) == task.tgt);
  for (const auto& r : reports) {
    CHECK(r.perplexity >= 1.0);
    CHECK(r.learning_rate == lr_schedule(r.epoch, cfg));
  }
}

TEST_CASE("overfit loss is non-increasing after epoch 3 at lr 0.5") {
  OverfitTask task = overfit_task();
  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.epochs = 100;
  cfg.lr0 = 0.5;
  cfg.decay_start_epoch = 1000;
  const auto reports = train(task.model, task.data, cfg);
  std::size_t violations = 0;
  for (std::size_t e = 3; e < reports.size(); ++e)
    if (reports[e].mean_cross_entropy > reports[e - 1].mean_cross_entropy) ++violations;
  CHECK(violations == 0);
}

TEST_CASE("training is deterministic given the seed") {
  const auto data = small_corpus(24, Mode::feature);
  TrainConfig cfg;
  cfg.batch_size = 5;
  cfg.epochs = 3;
  cfg.seed = 9;
  Model a = testutil::tiny_model(Mode::feature);
  Model b = testutil::tiny_model(Mode::feature);
  const auto ra = train(a, data, cfg);
  const auto rb = train(b, data, cfg);
  for (std::size_t e = 0; e < 3; ++e) CHECK(ra[e].mean_cross_entropy == rb[e].mean_cross_entropy);
  const auto pa = a.params.all(), pb = b.params.all();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
}

TEST_CASE("resuming from a checkpoint matches an uninterrupted run") {
  const auto data = small_corpus(24, Mode::token);
  const auto dir = fresh_dir("resume");
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 4;
  cfg.decay_start_epoch = 2;
  cfg.seed = 3;
  cfg.checkpoint_dir = dir;
  Model full = testutil::tiny_model(Mode::token);
  const auto reports = train(full, data, cfg);
  for (std::size_t e = 1; e <= 4; ++e) CHECK(std::filesystem::exists(checkpoint_path(dir, e)));

  std::ifstream log(dir / "train_log.tsv");
  std::size_t lines = 0;
  for (std::string line; std::getline(log, line);) {
    std::istringstream row(line);
    std::size_t epoch;
    double loss, lr;
    row >> epoch >> loss >> lr;
    CHECK(epoch == lines + 1);
    CHECK(lr == lr_schedule(epoch, cfg));
    ++lines;
  }
  CHECK(lines == 4);

  std::ifstream in(checkpoint_path(dir, 2), std::ios::binary);
  Model resumed = load_model(in);
  TrainConfig rest = cfg;
  rest.checkpoint_dir = fresh_dir("resume_b");
  const auto tail = train(resumed, data, rest, 3);
  REQUIRE(tail.size() == 2);
  CHECK(tail[0].mean_cross_entropy == reports[2].mean_cross_entropy);
  CHECK(tail[1].mean_cross_entropy == reports[3].mean_cross_entropy);
  const auto pa = full.params.all(), pb = resumed.params.all();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(rest.checkpoint_dir);
}

TEST_CASE("progress output is one TSV line per epoch") {
  const auto data = small_corpus(6, Mode::join);
  std::ostringstream progress;
  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.epochs = 2;
  cfg.progress = &progress;
  Model m = testutil::tiny_model(Mode::join);
  train(m, data, cfg);
  std::istringstream lines(progress.str());
  std::size_t n = 0;
  for (std::string line; std::getline(lines, line); ++n)
    CHECK(std::count(line.begin(), line.end(), '\t') == 4);
  CHECK(n == 2);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  const auto data = small_corpus(6, Mode::join);
  Model m = testutil::tiny_model(Mode::join);
  m.params.W_c.value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.epochs = 1;
  try {
    train(m, data, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);
    CHECK(msg.find("W_c") != std::string::npos);
  }
}

TEST_CASE("evaluate_loss leaves parameters untouched") {
  const auto data = small_corpus(6, Mode::feature);
  const Model m = testutil::tiny_model(Mode::feature);
  const double a = evaluate_loss(m, data, 4);
  CHECK(a > 0.0);
  CHECK(evaluate_loss(m, data, 2) == doctest::Approx(a).epsilon(1e-12));
}
