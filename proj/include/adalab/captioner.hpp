#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "adalab/imaging.hpp"
#include "adalab/optim.hpp"
#include "adalab/tape.hpp"

namespace adalab {

// Shared image-to-report architecture for victim and attacker: patch encoder
// plus autoregressive attention decoder.
struct ModelConfig {
  uint16_t grid = 32;
  size_t patch = 8;
  size_t width = 64;
  size_t layers = 2;
  size_t heads = 4;
  size_t ffn_width = 128;
  size_t max_len = 24;
  uint64_t init_seed = 1;

  size_t head_dim() const { return width / heads; }
  size_t patches() const {
    size_t side = grid / patch;
    return side * side;
  }
  void validate() const;
};

// Token ids: 0 <pad>, 1 <s>, 2 </s>, 3 <unk>, then content tokens.
struct TokenVocab {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;

  static TokenVocab specials_only();
  static TokenVocab full_lexicon();
  // Specials plus content tokens in order of first observation.
  static TokenVocab from_observed(const std::vector<Report>& replies);

  int id(const std::string& tok) const;
  int id_or_unk(const std::string& tok) const;
  size_t size() const { return tokens.size(); }
  void add(const std::string& tok);
  // Appends unseen tokens from replies; returns how many were added.
  size_t grow_from(const std::vector<Report>& replies);
};

constexpr int kPadId = 0;
constexpr int kBosId = 1;
constexpr int kEosId = 2;
constexpr int kUnkId = 3;

struct Captioner {
  ModelConfig cfg;
  TokenVocab vocab;
  ParamStore params;

  static Captioner init(ModelConfig cfg, TokenVocab vocab);

  // Extends token embedding and output head rows for tokens appended to the
  // vocab. New rows are seeded from (init_seed, token text), so the result
  // does not depend on when a token was first seen.
  void sync_params_to_vocab();

  // Report tokens -> ids with UNK fallback, truncated to max_len.
  std::vector<int> encode_tokens(const Report& r) const;
  Report decode_ids(const std::vector<int>& ids) const;
};

// Patch embeddings for one image: projection of each flattened patch plus the
// patch's positional embedding. Rows = (G/patch)^2.
Tensor encode_image(const Captioner& m, const ImageGrid& image);

// Teacher-forced loss node for one (image, target) pair. When `image_input`
// is set, the image joins the tape as that gradient-requesting input.
Tape::NodeId caption_loss(Tape& tape, const Captioner& m, const ImageGrid& image,
                          const std::vector<int>& target_ids,
                          const std::optional<std::string>& image_input = std::nullopt);

// Taped decoder forward: logits [len x V] for a BOS-led input id row.
Tensor teacher_forced_logits(const Captioner& m, const ImageGrid& image,
                             const std::vector<int>& input_ids);

// Sum over positions of log p(token | prefix, image) for a BOS...EOS
// sequence, computed teacher-forced.
double sequence_log_prob(const Captioner& m, const ImageGrid& image, const Report& tokens);

struct TrainConfig {
  size_t epochs = 4;
  size_t batch = 32;
  double lr = 3e-3;
  OptimizerState::Algo algo = OptimizerState::Algo::Adam;
  uint64_t seed = 1;
  int threads = 1;
};

// Minibatch training on masked cross-entropy; returns per-epoch mean loss.
// Deterministic for a fixed seed regardless of thread count.
std::vector<double> train_captioner(Captioner& m,
                                    const std::vector<std::pair<ImageGrid, Report>>& data,
                                    const TrainConfig& cfg);

}  // namespace adalab
