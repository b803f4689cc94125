#include "dcnmt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "dcnmt/error.hpp"

namespace dcnmt {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("decay_factor must lie in (0, 1]");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
}

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
  if (epoch <= cfg.decay_start_epoch) return cfg.lr0;
  return cfg.lr0 * std::pow(cfg.decay_factor, static_cast<double>(epoch - cfg.decay_start_epoch));
}

std::uint64_t epoch_shuffle_seed(std::uint64_t seed, std::size_t epoch) {
  return derive_seed(seed, 2 * epoch);
}

std::uint64_t epoch_dropout_seed(std::uint64_t seed, std::size_t epoch) {
  return derive_seed(seed, 2 * epoch + 1);
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const AnnotatedPair> pairs,
                                                   std::size_t batch_size, std::uint64_t seed) {
  std::vector<std::size_t> lengths;
  lengths.reserve(pairs.size());
  for (const auto& p : pairs) lengths.push_back(p.src.size());
  return make_batches(lengths, batch_size, seed);
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> lengths,
                                                   std::size_t batch_size, std::uint64_t seed) {
  if (lengths.empty()) throw InputError("make_batches: empty dataset");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  Rng rng(seed);
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  rng.shuffle(batches);
  return batches;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t epoch) {
  return dir / ("epoch" + std::to_string(epoch) + ".bin");
}

namespace {

std::string first_bad_parameter(const std::vector<Parameter*>& params) {
  for (const Parameter* p : params) {
    if (!all_finite(p->value)) return p->name + " (value)";
    if (!all_finite(p->grad)) return p->name + " (gradient)";
  }
  return "none";
}

Batch gather(std::span<const AnnotatedPair> data, const std::vector<std::size_t>& idx, Mode mode) {
  std::vector<const AnnotatedPair*> ptrs;
  ptrs.reserve(idx.size());
  for (std::size_t i : idx) ptrs.push_back(&data[i]);
  return make_batch(ptrs, mode);
}

}  // namespace

std::vector<EpochReport> train(Model& model, std::span<const AnnotatedPair> data,
                               const TrainConfig& cfg, std::size_t start_epoch) {
  cfg.validate();
  if (data.empty()) throw InputError("train: empty dataset");
  if (start_epoch < 1) throw ConfigError("start_epoch must be at least 1");
  std::vector<Parameter*> params = model.params.all();
  std::vector<EpochReport> reports;

  std::ofstream log;
  if (!cfg.checkpoint_dir.empty()) {
    std::filesystem::create_directories(cfg.checkpoint_dir);
    log.open(cfg.checkpoint_dir / "train_log.tsv", start_epoch == 1 ? std::ios::trunc : std::ios::app);
  }

  for (std::size_t epoch = start_epoch; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_schedule(epoch, cfg);
    Rng dropout_rng(epoch_dropout_seed(cfg.seed, epoch));
    const auto batches = make_batches(data, cfg.batch_size, epoch_shuffle_seed(cfg.seed, epoch));
    double total_ce = 0.0;
    std::size_t total_tokens = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch batch = gather(data, batches[bi], model.config.mode);
      zero_grads(params);
      Graph g(true);
      Var loss = batch_loss(g, model, batch, dropout_rng, true);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(bi) + ", parameter " + first_bad_parameter(params));
      }
      g.backward(ops::scale(loss, 1.0 / static_cast<double>(batch.num_target_tokens)));
      const double norm = clip_grad_norm(params, cfg.gradient_clip_norm);
      if (!std::isfinite(norm)) {
        throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(bi) + ", parameter " + first_bad_parameter(params));
      }
      sgd_update(params, lr);
      total_ce += value;
      total_tokens += batch.num_target_tokens;
    }
    EpochReport rep;
    rep.epoch = epoch;
    rep.mean_cross_entropy = total_ce / static_cast<double>(total_tokens);
    rep.perplexity = std::exp(rep.mean_cross_entropy);
    rep.learning_rate = lr;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    reports.push_back(rep);

    if (!cfg.checkpoint_dir.empty()) {
      save_model(model, checkpoint_path(cfg.checkpoint_dir, epoch));
      log << epoch << '\t' << rep.mean_cross_entropy << '\t' << lr << '\n';
      log.flush();
    }
    if (cfg.progress) {
      *cfg.progress << epoch << '\t' << rep.mean_cross_entropy << '\t' << rep.perplexity << '\t'
                    << lr << '\t' << rep.seconds << '\n';
      cfg.progress->flush();
    }
  }
  return reports;
}

double evaluate_loss(const Model& model, std::span<const AnnotatedPair> data,
                     std::size_t batch_size) {
  if (data.empty()) throw InputError("evaluate_loss: empty dataset");
  Model& m = const_cast<Model&>(model);
  Rng unused(0);
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < data.size(); i += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t k = i; k < std::min(data.size(), i + batch_size); ++k) idx.push_back(k);
    const Batch batch = gather(data, idx, model.config.mode);
    Graph g(false);
    total += batch_loss(g, m, batch, unused, false).value()[0];
    tokens += batch.num_target_tokens;
  }
  return total / static_cast<double>(tokens);
}

}  // namespace dcnmt
