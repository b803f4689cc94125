#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "dcnmt/corpus.hpp"
#include "dcnmt/model.hpp"

namespace dcnmt {

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 18;
  double lr0 = 1.0;
  double decay_factor = 0.5;
  std::size_t decay_start_epoch = 10;
  double gradient_clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::ostream* progress = nullptr;      // one TSV line per epoch

  void validate() const;
};

struct EpochReport {
  std::size_t epoch = 0;
  double mean_cross_entropy = 0.0;
  double perplexity = 1.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

// lr0 up to decay_start_epoch, then lr0 · decay^(epoch − decay_start_epoch).
double lr_schedule(std::size_t epoch, const TrainConfig& cfg);

// Shuffles with a generator seeded by `seed`, sorts stably by source length
// so batches hold similar lengths, cuts batches of at most batch_size, and
// shuffles the batch order. Returns pair indices per batch.
std::vector<std::vector<std::size_t>> make_batches(std::span<const AnnotatedPair> pairs,
                                                   std::size_t batch_size, std::uint64_t seed);
// Same procedure over bare sequence lengths.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> lengths,
                                                   std::size_t batch_size, std::uint64_t seed);

// Seeds for the shuffling and dropout streams of an epoch; a run resumed at
// any epoch sees the same streams as an uninterrupted one.
std::uint64_t epoch_shuffle_seed(std::uint64_t seed, std::size_t epoch);
std::uint64_t epoch_dropout_seed(std::uint64_t seed, std::size_t epoch);

// Minibatch SGD over `data` for epochs start_epoch..cfg.epochs. Each step
// minimises the summed token cross-entropy divided by the batch's non-pad
// target count, with global gradient-norm clipping. Throws NumericError with
// epoch, batch and parameter on a non-finite loss or gradient.
std::vector<EpochReport> train(Model& model, std::span<const AnnotatedPair> data,
                               const TrainConfig& cfg, std::size_t start_epoch = 1);

// Mean token cross-entropy of `data` with dropout off.
double evaluate_loss(const Model& model, std::span<const AnnotatedPair> data,
                     std::size_t batch_size = 64);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t epoch);

}  // namespace dcnmt
