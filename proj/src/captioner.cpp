#include "adalab/captioner.hpp"

#include <algorithm>
#include <cmath>

#include "adalab/common.hpp"
#include "adalab/grammar.hpp"

namespace adalab {

void ModelConfig::validate() const {
  if (grid == 0 || patch == 0 || grid % patch != 0)
    throw ValidationError("grid must be divisible by patch size");
  if (width == 0 || heads == 0 || width % heads != 0)
    throw ValidationError("width must be divisible by heads");
  if (max_len < 1) throw ValidationError("max_len must be >= 1");
  if (layers == 0 || ffn_width == 0) throw ValidationError("layers and ffn_width must be positive");
}

TokenVocab TokenVocab::specials_only() {
  TokenVocab v;
  for (const char* t : {kPadTok, kBosTok, kEosTok, kUnkTok}) v.add(t);
  return v;
}

TokenVocab TokenVocab::full_lexicon() {
  TokenVocab v;
  for (const auto& t : lexicon()) v.add(t);
  return v;
}

TokenVocab TokenVocab::from_observed(const std::vector<Report>& replies) {
  TokenVocab v = specials_only();
  v.grow_from(replies);
  return v;
}

int TokenVocab::id(const std::string& tok) const {
  auto it = index.find(tok);
  return it == index.end() ? -1 : it->second;
}

int TokenVocab::id_or_unk(const std::string& tok) const {
  int i = id(tok);
  return i < 0 ? kUnkId : i;
}

void TokenVocab::add(const std::string& tok) {
  if (index.count(tok)) return;
  index[tok] = static_cast<int>(tokens.size());
  tokens.push_back(tok);
}

size_t TokenVocab::grow_from(const std::vector<Report>& replies) {
  size_t before = tokens.size();
  for (const auto& r : replies)
    for (const auto& t : r) add(t);
  return tokens.size() - before;
}

namespace {

Tensor seeded_row(size_t width, double stddev, uint64_t seed, const std::string& token) {
  auto rng = derive_rng(seed, {0x746f6b, fnv1a64(token.data(), token.size())});
  return random_normal({width}, stddev, rng);
}

constexpr double kEmbStd = 0.1;

}  // namespace

Captioner Captioner::init(ModelConfig cfg, TokenVocab vocab) {
  cfg.validate();
  Captioner m;
  m.cfg = cfg;
  m.vocab = std::move(vocab);
  auto rng = derive_rng(cfg.init_seed, {0x696e6974});

  size_t e = cfg.width, pe = cfg.patch * cfg.patch, p = cfg.patches();
  double proj_std = 1.0 / std::sqrt(static_cast<double>(pe));
  double attn_std = 1.0 / std::sqrt(static_cast<double>(e));
  double ffn_std = 1.0 / std::sqrt(static_cast<double>(cfg.ffn_width));

  m.params["enc.proj"] = random_normal({pe, e}, proj_std, rng);
  m.params["enc.pos"] = random_normal({p, e}, kEmbStd, rng);
  m.params["dec.pos"] = random_normal({cfg.max_len, e}, kEmbStd, rng);
  for (size_t l = 0; l < cfg.layers; ++l) {
    std::string base = "dec" + std::to_string(l);
    for (const char* part : {"self", "cross"}) {
      for (size_t h = 0; h < cfg.heads; ++h) {
        std::string hh = std::to_string(h);
        m.params[base + "." + part + ".q" + hh] = random_normal({e, cfg.head_dim()}, attn_std, rng);
        m.params[base + "." + part + ".k" + hh] = random_normal({e, cfg.head_dim()}, attn_std, rng);
        m.params[base + "." + part + ".v" + hh] = random_normal({e, cfg.head_dim()}, attn_std, rng);
      }
      m.params[base + "." + part + ".out"] = random_normal({e, e}, attn_std, rng);
    }
    m.params[base + ".ffn.w1"] = random_normal({e, cfg.ffn_width}, attn_std, rng);
    m.params[base + ".ffn.b1"] = Tensor::zeros({cfg.ffn_width});
    m.params[base + ".ffn.w2"] = random_normal({cfg.ffn_width, e}, ffn_std, rng);
    m.params[base + ".ffn.b2"] = Tensor::zeros({e});
    for (const char* ln : {"ln1", "ln2", "ln3"}) {
      m.params[base + "." + ln + ".g"] = Tensor::full({e}, 1.0);
      m.params[base + "." + ln + ".b"] = Tensor::zeros({e});
    }
  }
  // token-dependent rows are seeded per token so vocab growth is
  // order-independent
  m.params["dec.tok_emb"] = Tensor::zeros({0, e});
  m.params["head.w"] = Tensor::zeros({0, e});
  m.sync_params_to_vocab();
  return m;
}

void Captioner::sync_params_to_vocab() {
  size_t e = cfg.width;
  double head_std = 1.0 / std::sqrt(static_cast<double>(e));
  for (const char* name : {"dec.tok_emb", "head.w"}) {
    Tensor& t = params[name];
    size_t have = t.shape.empty() ? 0 : t.shape[0];
    if (have > vocab.size()) throw ContractError("vocab shrank below parameter rows");
    if (have == vocab.size()) continue;
    Tensor grown = Tensor::zeros({vocab.size(), e});
    std::copy(t.data.begin(), t.data.end(), grown.data.begin());
    bool is_head = std::string(name) == "head.w";
    for (size_t row = have; row < vocab.size(); ++row) {
      Tensor init = seeded_row(e, is_head ? head_std : kEmbStd,
                               cfg.init_seed ^ (is_head ? 0x68656164ULL : 0x656d62ULL),
                               vocab.tokens[row]);
      std::copy(init.data.begin(), init.data.end(), grown.data.begin() + row * e);
    }
    t = std::move(grown);
  }
}

std::vector<int> Captioner::encode_tokens(const Report& r) const {
  std::vector<int> ids;
  ids.reserve(std::min(r.size(), cfg.max_len));
  for (const auto& tok : r) {
    if (ids.size() >= cfg.max_len) break;
    ids.push_back(vocab.id_or_unk(tok));
  }
  return ids;
}

Report Captioner::decode_ids(const std::vector<int>& ids) const {
  Report out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= vocab.size())
      throw IndexError("token id out of vocabulary: " + std::to_string(id));
    out.push_back(vocab.tokens[static_cast<size_t>(id)]);
  }
  return out;
}

Tensor encode_image(const Captioner& m, const ImageGrid& image) {
  if (image.g != m.cfg.grid)
    throw ContractError("image size " + std::to_string(image.g) + " does not match config grid " +
                        std::to_string(m.cfg.grid));
  Tape tape(&m.params);
  Tape::NodeId img = tape.constant(image.to_tensor());
  Tape::NodeId patches = tape.patchify(img, m.cfg.patch);
  Tape::NodeId mem = tape.add(tape.matmul(patches, tape.param("enc.proj")), tape.param("enc.pos"));
  return tape.value(mem);
}

namespace {

// Decoder forward on the tape: returns the logits node [L x V].
Tape::NodeId decoder_logits(Tape& tape, const Captioner& m, Tape::NodeId memory,
                            const std::vector<int>& input_ids) {
  size_t L = input_ids.size(), e = m.cfg.width, dh = m.cfg.head_dim();
  double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Tape::NodeId x = tape.add(tape.embedding(tape.param("dec.tok_emb"), input_ids),
                            tape.slice_rows(tape.param("dec.pos"), 0, L));

  Tensor mask = Tensor::zeros({L, L});
  for (size_t i = 0; i < L; ++i)
    for (size_t j = i + 1; j < L; ++j) mask.at(i, j) = -1e30;
  Tape::NodeId causal = tape.constant(std::move(mask));

  for (size_t l = 0; l < m.cfg.layers; ++l) {
    std::string base = "dec" + std::to_string(l);
    // masked self attention
    Tape::NodeId ctx = 0;
    for (size_t h = 0; h < m.cfg.heads; ++h) {
      std::string hh = std::to_string(h);
      Tape::NodeId q = tape.matmul(x, tape.param(base + ".self.q" + hh));
      Tape::NodeId k = tape.matmul(x, tape.param(base + ".self.k" + hh));
      Tape::NodeId v = tape.matmul(x, tape.param(base + ".self.v" + hh));
      Tape::NodeId scores =
          tape.add(tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_dh), causal);
      Tape::NodeId head_ctx = tape.matmul(tape.softmax(scores), v);
      ctx = h == 0 ? head_ctx : tape.concat_cols(ctx, head_ctx);
    }
    x = tape.layer_norm(tape.add(x, tape.matmul(ctx, tape.param(base + ".self.out"))),
                        tape.param(base + ".ln1.g"), tape.param(base + ".ln1.b"));
    // cross attention over patch memory
    for (size_t h = 0; h < m.cfg.heads; ++h) {
      std::string hh = std::to_string(h);
      Tape::NodeId q = tape.matmul(x, tape.param(base + ".cross.q" + hh));
      Tape::NodeId k = tape.matmul(memory, tape.param(base + ".cross.k" + hh));
      Tape::NodeId v = tape.matmul(memory, tape.param(base + ".cross.v" + hh));
      Tape::NodeId scores = tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_dh);
      Tape::NodeId head_ctx = tape.matmul(tape.softmax(scores), v);
      ctx = h == 0 ? head_ctx : tape.concat_cols(ctx, head_ctx);
    }
    x = tape.layer_norm(tape.add(x, tape.matmul(ctx, tape.param(base + ".cross.out"))),
                        tape.param(base + ".ln2.g"), tape.param(base + ".ln2.b"));
    // feed forward
    Tape::NodeId hdn = tape.relu(
        tape.bias_add(tape.matmul(x, tape.param(base + ".ffn.w1")), tape.param(base + ".ffn.b1")));
    Tape::NodeId ff =
        tape.bias_add(tape.matmul(hdn, tape.param(base + ".ffn.w2")), tape.param(base + ".ffn.b2"));
    x = tape.layer_norm(tape.add(x, ff), tape.param(base + ".ln3.g"), tape.param(base + ".ln3.b"));
  }
  return tape.matmul(x, tape.transpose(tape.param("head.w")));
}

}  // namespace

Tensor teacher_forced_logits(const Captioner& m, const ImageGrid& image,
                             const std::vector<int>& input_ids) {
  Tape tape(&m.params);
  Tape::NodeId img = tape.constant(image.to_tensor());
  Tape::NodeId patches = tape.patchify(img, m.cfg.patch);
  Tape::NodeId memory =
      tape.add(tape.matmul(patches, tape.param("enc.proj")), tape.param("enc.pos"));
  return tape.value(decoder_logits(tape, m, memory, input_ids));
}

Tape::NodeId caption_loss(Tape& tape, const Captioner& m, const ImageGrid& image,
                          const std::vector<int>& target_ids,
                          const std::optional<std::string>& image_input) {
  if (target_ids.empty()) throw ContractError("caption_loss needs at least one target token");
  if (target_ids.size() > m.cfg.max_len)
    throw ContractError("target longer than max_len");
  Tape::NodeId img = image_input ? tape.input(*image_input, image.to_tensor())
                                 : tape.constant(image.to_tensor());
  Tape::NodeId patches = tape.patchify(img, m.cfg.patch);
  Tape::NodeId memory =
      tape.add(tape.matmul(patches, tape.param("enc.proj")), tape.param("enc.pos"));

  std::vector<int> input_ids;
  input_ids.reserve(target_ids.size());
  input_ids.push_back(kBosId);
  for (size_t i = 0; i + 1 < target_ids.size(); ++i) input_ids.push_back(target_ids[i]);

  Tape::NodeId logits = decoder_logits(tape, m, memory, input_ids);
  return tape.cross_entropy(logits, target_ids);
}

std::vector<double> train_captioner(Captioner& m,
                                    const std::vector<std::pair<ImageGrid, Report>>& data,
                                    const TrainConfig& cfg) {
  if (data.empty()) throw ContractError("training dataset is empty");
  OptimizerState opt = cfg.algo == OptimizerState::Algo::Adam ? OptimizerState::adam(cfg.lr)
                                                              : OptimizerState::sgd(cfg.lr);
  std::vector<std::vector<int>> targets;
  targets.reserve(data.size());
  for (const auto& [img, rep] : data) {
    targets.push_back(m.encode_tokens(rep));
    if (targets.back().empty()) throw ContractError("empty report in training data");
  }

  std::vector<double> epoch_losses;
  auto shuffle_rng = derive_rng(cfg.seed, {0x73687566});
  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += cfg.batch) {
      size_t count = std::min(cfg.batch, order.size() - start);
      std::vector<Gradients> grads(count);
      std::vector<double> losses(count);
      parallel_for(count, cfg.threads, [&](size_t i) {
        size_t idx = order[start + i];
        Tape tape(&m.params);
        Tape::NodeId loss = caption_loss(tape, m, data[idx].first, targets[idx]);
        losses[i] = tape.value(loss).data[0];
        grads[i] = tape.backward(loss);
      });
      std::map<std::string, Tensor> total;
      for (size_t i = 0; i < count; ++i) {
        loss_sum += losses[i];
        for (auto& [name, g] : grads[i].params) {
          Tensor& slot = total[name];
          if (slot.data.empty())
            slot = std::move(g);
          else
            for (size_t j = 0; j < slot.data.size(); ++j) slot.data[j] += g.data[j];
        }
      }
      double inv = 1.0 / static_cast<double>(count);
      for (auto& [name, g] : total)
        for (double& v : g.data) v *= inv;
      opt.step(m.params, total);
    }
    double mean = loss_sum / static_cast<double>(data.size());
    if (!std::isfinite(mean)) throw NumericError("training loss became non-finite");
    epoch_losses.push_back(mean);
  }
  return epoch_losses;
}

}  // namespace adalab
