#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dcnmt/corpus.hpp"
#include "dcnmt/domain.hpp"
#include "dcnmt/graph.hpp"
#include "dcnmt/lstm.hpp"
#include "dcnmt/param.hpp"
#include "dcnmt/rng.hpp"
#include "dcnmt/vocab.hpp"

namespace dcnmt {

struct ModelConfig {
  std::size_t word_dim = 64;     // 500 in the full-scale recipe
  std::size_t feature_dim = 0;   // > 0 exactly in Feature mode (default 8 there)
  std::size_t hidden_dim = 64;
  std::size_t num_layers = 2;
  Vocabulary vocab;
  DomainTagSet tags;
  Mode mode = Mode::join;
  double dropout_p = 0.3;
  std::size_t max_decode_len = 100;

  // Throws ConfigError when an invariant does not hold.
  void validate() const;
  std::size_t encoder_input_dim() const { return word_dim + feature_dim; }
};

// Every learnable tensor of the translation network.
struct ModelParams {
  Parameter src_embed;  // V × d_w
  Parameter tgt_embed;  // V × d_w
  Parameter feat_embed; // K × d_f, Feature mode only
  std::vector<LstmCell> enc_fwd;
  std::vector<LstmCell> enc_bwd;
  std::vector<LstmCell> dec;
  Parameter W_a;    // h × h, attention score h_tᵀ·W_a·h̄_s
  Parameter W_c;    // 2h × h, combines [context ; h_t]
  Parameter W_out;  // h × V
  Parameter b_out;  // 1 × V

  // Zero-valued parameters with the shapes implied by `config`.
  static ModelParams shaped_for(const ModelConfig& config);
  void init(Rng& rng, double range = 0.1);

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
};

struct Model {
  ModelConfig config;
  ModelParams params;

  static Model create(ModelConfig config, std::uint64_t seed);
};

// Per-sentence, tensor-valued views of the network.

struct EncoderOutputs {
  std::vector<Tensor> hbar;       // J × (1×h), summed directional outputs
  std::vector<Tensor> fwd_out;    // top-layer forward outputs
  std::vector<Tensor> bwd_out;    // top-layer backward outputs
  std::vector<Tensor> final_h;    // per layer, forward + backward final states
  std::vector<Tensor> final_c;
};

struct AttentionResult {
  Tensor weights;  // 1×J
  Tensor context;  // 1×h
};

struct DecoderState {
  std::vector<Tensor> h;
  std::vector<Tensor> c;
  bool initialized() const { return !h.empty(); }
};

// One input vector per source position, width d_w (+ d_f in Feature mode).
std::vector<Tensor> embed_source(const Model& model, std::span<const int> src,
                                 std::span<const int> features = {});
EncoderOutputs encode(const Model& model, const std::vector<Tensor>& inputs, Rng& rng,
                      bool training);
AttentionResult attend(const Model& model, const Tensor& h_t, const EncoderOutputs& enc);
DecoderState initial_state(const EncoderOutputs& enc);
// Returns the distribution over the target vocabulary and the next state.
std::pair<Tensor, DecoderState> decode_step(const Model& model, int prev_token,
                                            const DecoderState& state, const EncoderOutputs& enc,
                                            Rng& rng, bool training);

// Greedy translation of unframed source word ids. Returns target ids without
// control symbols. Ties in the argmax go to the lowest id.
std::vector<int> greedy_decode(const Model& model, std::span<const int> src_words,
                               std::optional<int> domain);

// Minibatch layout, time-major: src[t][b] is the token of sentence b at t.
struct Batch {
  std::size_t size = 0;
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  std::vector<std::vector<int>> src;
  std::vector<std::vector<int>> features;
  std::vector<std::vector<char>> src_mask;
  std::vector<std::vector<int>> tgt_in;
  std::vector<std::vector<int>> tgt_out;
  std::vector<std::vector<double>> tgt_weight;
  std::size_t num_target_tokens = 0;
};

// Pads with <pad>; padded target positions carry weight 0.
Batch make_batch(std::span<const AnnotatedPair* const> pairs, Mode mode);

// Sum of token cross-entropies over the non-pad targets of the batch.
Var batch_loss(Graph& g, Model& model, const Batch& batch, Rng& rng, bool training);

// Model file: "DCNMT", u32 version, config block, then named tensors.
void save_model(const Model& model, std::ostream& os);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(std::istream& is);
Model load_model(const std::filesystem::path& path);

}  // namespace dcnmt
