// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria. An optional argument names a directory for the benchmark
// artifacts (models, tables, logs) and a copy of the PASS/FAIL lines.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dcnmt/bleu.hpp"
#include "dcnmt/error.hpp"
#include "dcnmt/experiment.hpp"
#include "dcnmt/gradcheck.hpp"
#include "dcnmt/trainer.hpp"
#include "helpers.hpp"
#include "tiny.hpp"

using namespace dcnmt;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream ss;
  ss << std::setprecision(digits) << v;
  return ss.str();
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  Model m = testutil::tiny_model(Mode::feature, 8, 2, 1, 1.0, 20);
  std::vector<AnnotatedPair> pairs;
  const std::vector<std::vector<int>> src = {{4, 5, 6, 3}, {9, 3}, {13, 14, 15, 16, 3}};
  const std::vector<std::vector<int>> tgt = {{7, 8, 3}, {10, 11, 12, 3}, {5, 3}};
  for (std::size_t i = 0; i < 3; ++i) {
    AnnotatedPair p;
    p.src = src[i];
    p.tgt = tgt[i];
    p.domain = static_cast<int>(i);
    p.src_features.assign(p.src.size(), p.domain);
    pairs.push_back(p);
  }
  std::vector<const AnnotatedPair*> ptrs;
  for (const auto& p : pairs) ptrs.push_back(&p);
  const Batch batch = make_batch(ptrs, Mode::feature);
  const auto params = m.params.all();
  const auto r = grad_check(
      [&](Graph& g) {
        Rng rng(1);
        return batch_loss(g, m, batch, rng, false);
      },
      params, 1e-5);
  const double secs = seconds_since(t0);
  return {r.max_relative_error < 1e-4 && secs < 120.0,
          "max rel err " + fmt(r.max_relative_error) + " over " + std::to_string(r.entries_checked) +
              " entries (worst " + r.worst_parameter + "), " + fmt(secs, 3) + " s"};
}

Outcome attention_equations() {
  double worst = 0.0, worst_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    std::mt19937_64 gen(seed);
    const std::size_t h = 2 + seed % 5, J = 1 + seed % 9;
    Model m = testutil::tiny_model(Mode::join, h, 1, seed);
    m.params.W_a.value = testutil::random_tensor(h, h, gen, -2, 2);
    EncoderOutputs enc;
    oracle::Mat hbar;
    for (std::size_t s = 0; s < J; ++s) {
      enc.hbar.push_back(testutil::random_tensor(1, h, gen, -2, 2));
      hbar.push_back(testutil::to_vec(enc.hbar.back()));
    }
    const Tensor ht = testutil::random_tensor(1, h, gen, -2, 2);
    const AttentionResult r = attend(m, ht, enc);
    oracle::Vec w, ctx;
    oracle::attention(testutil::to_vec(ht), testutil::to_mat(m.params.W_a.value), hbar, w, ctx);
    for (std::size_t s = 0; s < J; ++s) worst = std::max(worst, std::abs(r.weights[s] - w[s]));
    for (std::size_t k = 0; k < h; ++k) worst = std::max(worst, std::abs(r.context[k] - ctx[k]));
    worst_sum = std::max(worst_sum, std::abs(sum(r.weights) - 1.0));
  }
  return {worst < 1e-12 && worst_sum < 1e-9,
          "max |diff| " + fmt(worst) + ", max |sum w - 1| " + fmt(worst_sum) + " on 100 instances"};
}

Outcome encoder_summation() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const Model m = testutil::tiny_model(Mode::feature, 8, 2, seed, 0.8);
    std::mt19937_64 gen(seed);
    const std::size_t J = 1 + seed % 7;
    std::vector<Tensor> inputs;
    std::vector<oracle::Vec> ov;
    for (std::size_t t = 0; t < J; ++t) {
      inputs.push_back(testutil::random_tensor(1, 11, gen));
      ov.push_back(testutil::to_vec(inputs.back()));
    }
    Rng rng(1);
    const EncoderOutputs enc = encode(m, inputs, rng, false);
    oracle::Vec fh, fc, bh, bc;
    const auto fwd = testutil::oracle_direction(m.params.enc_fwd, ov, false, fh, fc, 1);
    const auto bwd = testutil::oracle_direction(m.params.enc_bwd, ov, true, bh, bc, 1);
    for (std::size_t t = 0; t < J; ++t)
      for (std::size_t k = 0; k < 8; ++k) worst = std::max(worst, std::abs(enc.hbar[t][k] - (fwd[t][k] + bwd[t][k])));
  }
  return {worst < 1e-12, "max |hbar - (fwd + bwd)| " + fmt(worst) + " on 50 sentences"};
}

Outcome bleu_oracle() {
  auto s = [](const std::string& line) { return split_tokens(line); };
  const std::vector<Sentence> ident = {s("a b c d e"), s("f g h i")};
  const double id = bleu(ident, ident).bleu;
  // Last-token substitution gives p = 5/6, 4/5, 3/4, 2/3.
  const std::vector<Sentence> h = {s("the cat sat on the mat")}, r = {s("the cat sat on the hat")};
  const BleuReport ex = bleu(h, r);
  const double expected = std::pow((5.0 / 6) * (4.0 / 5) * (3.0 / 4) * (2.0 / 3), 0.25);
  const bool p_ok = std::abs(ex.precision[0] - 5.0 / 6) < 1e-12 && std::abs(ex.precision[1] - 4.0 / 5) < 1e-12 &&
                    std::abs(ex.precision[2] - 3.0 / 4) < 1e-12 && std::abs(ex.precision[3] - 2.0 / 3) < 1e-12;
  const std::vector<Sentence> hz = {s("the the the the")}, rz = {s("the cat")};
  const double zero = bleu(hz, rz).bleu;
  const bool pass = id == 1.0 && p_ok && std::abs(ex.bleu - expected) < 1e-6 && zero == 0.0;
  return {pass, "identity " + fmt(id) + ", example " + fmt(ex.bleu, 7) + " vs " + fmt(expected, 7) +
                    ", zero-precision case " + fmt(zero)};
}

Outcome overfit_smoke() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::vector<std::string>> sides = {{"a", "b", "c", "d", "e"}, {"x", "y", "z", "w"}};
  ModelConfig mc;
  mc.vocab = Vocabulary::build(sides, 100);
  mc.tags = DomainTagSet({"A"});
  mc.mode = Mode::join;
  mc.word_dim = mc.hidden_dim = 16;
  mc.num_layers = 1;
  mc.dropout_p = 0.0;
  const std::vector<LabeledPair> pairs = {{"A", sides[0], sides[1], {}}};
  const auto data = prepare_pairs(pairs, Mode::join, mc.vocab, mc.tags);
  Model m = Model::create(mc, 1);
  TrainConfig tc;
  tc.batch_size = 1;
  tc.epochs = 200;
  tc.decay_start_epoch = 1000;
  const auto reports = train(m, data, tc);
  const bool exact = greedy_decode(m, mc.vocab.encode(sides[0]), std::nullopt) == mc.vocab.encode(sides[1]);
  const double secs = seconds_since(t0);
  return {reports.back().perplexity < 1.05 && exact && secs < 60.0,
          "final ppl " + fmt(reports.back().perplexity, 6) + ", exact decode " + (exact ? "yes" : "no") + ", " +
              fmt(secs, 3) + " s"};
}

struct Benchmark {
  BenchmarkResult result;
  double seconds = 0.0;
  std::string error;
};

Benchmark run_synthetic_benchmark(const std::filesystem::path& work_dir) {
  Benchmark b;
  BenchmarkConfig cfg = default_benchmark_config();
  cfg.work_dir = work_dir;
  std::ofstream log;
  if (!work_dir.empty()) {
    std::filesystem::create_directories(work_dir);
    log.open(work_dir / "benchmark.log");
    cfg.log = &log;
  }
  const auto t0 = std::chrono::steady_clock::now();
  try {
    b.result = run_benchmark(cfg);
  } catch (const std::exception& e) {
    b.error = e.what();
  }
  b.seconds = seconds_since(t0);
  return b;
}

Outcome domain_control(const Benchmark& b) {
  if (!b.error.empty()) return {false, "benchmark failed: " + b.error};
  const auto& t = b.result.table;
  const Cell join = parse_cell("join"), feat = parse_cell("feature-oracle");
  bool pass = b.seconds < 1800.0;
  std::string detail;
  for (const auto& d : t.domains) {
    const auto& j = t.at(d, join);
    const auto& f = t.at(d, feat);
    const double fa = f.ambiguous->accuracy(), ja = j.ambiguous->accuracy();
    pass = pass && fa >= 0.90 && ja <= 0.70 && f.bleu.bleu >= j.bleu.bleu;
    detail += d + ": Feature(Oracle) amb " + fmt(fa, 3) + " bleu " + fmt(100 * f.bleu.bleu, 4) + ", Join amb " +
              fmt(ja, 3) + " bleu " + fmt(100 * j.bleu.bleu, 4) + "; ";
  }
  return {pass, detail + "benchmark " + fmt(b.seconds, 4) + " s"};
}

Outcome classifier_criterion(const Benchmark& b) {
  if (!b.error.empty()) return {false, "benchmark failed: " + b.error};
  const auto& t = b.result.table;
  const double acc = b.result.classifier_eval.accuracy;
  bool pass = acc >= 95.0;
  std::string detail = "held-out accuracy " + fmt(acc, 4) + "%; ";
  for (const auto& d : t.domains) {
    const double o = t.at(d, parse_cell("feature-oracle")).ambiguous->accuracy();
    const double r = t.at(d, parse_cell("feature-rnn")).ambiguous->accuracy();
    pass = pass && std::abs(o - r) <= 0.05;
    detail += d + " amb oracle " + fmt(o, 3) + " rnn " + fmt(r, 3) + "; ";
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

Outcome cross_domain(const Benchmark& b) {
  if (!b.error.empty()) return {false, "benchmark failed: " + b.error};
  if (!b.result.matrix) return {false, "no matrix"};
  const auto& m = *b.result.matrix;
  bool pass = true;
  double worst_off_amb = 0.0, min_margin = 1.0;
  for (std::size_t r = 0; r < m.domains.size(); ++r) {
    for (std::size_t c = 0; c < m.domains.size(); ++c) {
      if (r == c) continue;
      min_margin = std::min(min_margin, m.bleu[r][r] - m.bleu[r][c]);
      const double a = m.ambiguous[r][c].value_or(1.0);
      worst_off_amb = std::max(worst_off_amb, a);
    }
  }
  pass = min_margin > 0.0 && worst_off_amb < 0.5;
  return {pass, "min diagonal margin " + fmt(100 * min_margin, 4) + " BLEU, max off-diagonal amb " + fmt(worst_off_amb, 3)};
}

Outcome determinism_and_serialization() {
  std::string detail;
  // Identical seeds, identical per-epoch losses.
  CorpusSpec spec;
  spec.sentences_per_domain = 60;
  const SyntheticCorpus corpus = generate(spec);
  const Pipeline pipe = build_pipeline(corpus.train, 100, 1000);
  const auto subword = apply_bpe(corpus.train, pipe.bpe);
  const Vocabulary vocab = vocab_for_mode(pipe.vocab, pipe.tags, Mode::feature);
  const auto data = prepare_pairs(subword, Mode::feature, vocab, pipe.tags);
  ModelConfig mc;
  mc.vocab = vocab;
  mc.tags = pipe.tags;
  mc.mode = Mode::feature;
  mc.word_dim = mc.hidden_dim = 16;
  mc.feature_dim = 4;
  TrainConfig tc;
  tc.batch_size = 16;
  tc.epochs = 3;
  tc.seed = 11;
  Model a = Model::create(mc, 5), b = Model::create(mc, 5);
  const auto ra = train(a, data, tc), rb = train(b, data, tc);
  bool same = true;
  for (std::size_t e = 0; e < ra.size(); ++e) same = same && ra[e].mean_cross_entropy == rb[e].mean_cross_entropy;
  detail += std::string("losses ") + (same ? "identical" : "differ");

  // Save, load, save: identical bytes and identical tensors.
  std::stringstream first;
  save_model(a, first);
  const std::string bytes = first.str();
  const Model back = load_model(first);
  std::stringstream second;
  save_model(back, second);
  bool bitwise = second.str() == bytes;
  const auto pa = a.params.all();
  const auto pb = back.params.all();
  for (std::size_t i = 0; i < pa.size(); ++i) bitwise = bitwise && pa[i]->value == pb[i]->value;
  detail += std::string(", save/load ") + (bitwise ? "bit-exact" : "differs");

  // BPE roundtrip over random sentences of random strings.
  std::mt19937_64 gen(3);
  const std::string letters = "abcdefghijklmnopqrstuvwxyz";
  std::size_t failures = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> words;
    for (std::size_t w = 0; w < 1 + gen() % 12; ++w) {
      std::string word;
      for (std::size_t k = 0; k < 1 + gen() % 10; ++k) word += letters[gen() % 26];
      if (gen() % 4 == 0) word = corpus.train[gen() % corpus.train.size()].src[0];
      words.push_back(word);
    }
    if (remove_bpe(pipe.bpe.apply(words)) != words) ++failures;
  }
  detail += ", BPE roundtrip failures " + std::to_string(failures) + "/1000";
  return {same && bitwise && failures == 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path work_dir = argc > 1 ? argv[1] : "";
  int failed = 0;
  std::ofstream summary;
  if (!work_dir.empty()) {
    std::filesystem::create_directories(work_dir);
    summary.open(work_dir / "acceptance.txt");
  }
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail << '\n';
    std::cout << line.str() << std::flush;
    if (summary) summary << line.str() << std::flush;
  };

  report(1, "gradient correctness", gradient_correctness);
  report(2, "attention equations", attention_equations);
  report(3, "encoder summation", encoder_summation);
  report(4, "BLEU oracle", bleu_oracle);
  report(5, "overfit smoke test", overfit_smoke);
  const Benchmark bench = run_synthetic_benchmark(work_dir);
  report(6, "domain control", [&] { return domain_control(bench); });
  report(7, "classifier", [&] { return classifier_criterion(bench); });
  report(8, "cross-domain matrix", [&] { return cross_domain(bench); });
  report(9, "determinism and serialization", determinism_and_serialization);
  return failed;
}
