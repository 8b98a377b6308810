#include "adalab/decode.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "adalab/common.hpp"
#include "adalab/grammar.hpp"

namespace adalab {

void DecodeConfig::validate() const {
  if (beam_width < 1) throw ValidationError("beam width must be >= 1");
  if (strategy == Strategy::DiverseBeam) {
    if (groups < 1) throw ValidationError("group count must be >= 1");
    if (beam_width % groups != 0)
      throw ValidationError("beam width must be divisible by group count");
  }
  if (diversity_penalty < 0.0) throw ValidationError("diversity penalty must be >= 0");
  if (max_len < 1) throw ValidationError("max_len must be >= 1");
}

DecodeConfig::Strategy DecodeConfig::strategy_from_string(const std::string& s) {
  if (s == "greedy") return Strategy::Greedy;
  if (s == "beam") return Strategy::Beam;
  if (s == "diverse_beam") return Strategy::DiverseBeam;
  throw ValidationError("unknown decode strategy: " + s);
}

std::string DecodeConfig::strategy_to_string(Strategy s) {
  switch (s) {
    case Strategy::Greedy: return "greedy";
    case Strategy::Beam: return "beam";
    case Strategy::DiverseBeam: return "diverse_beam";
  }
  return "?";
}

namespace {

// Raw pointers into the parameter store, resolved once per decode.
struct ModelView {
  const ModelConfig* cfg;
  size_t e, dh, heads, layers, ffn, vocab;
  double inv_sqrt_dh;
  const double* tok_emb;
  const double* dec_pos;
  const double* head;
  struct Layer {
    std::vector<const double*> self_q, self_k, self_v;
    const double* self_out;
    std::vector<const double*> cross_q, cross_k, cross_v;
    const double* cross_out;
    const double *ffn_w1, *ffn_b1, *ffn_w2, *ffn_b2;
    const double *ln1g, *ln1b, *ln2g, *ln2b, *ln3g, *ln3b;
  };
  std::vector<Layer> layer;

  explicit ModelView(const Captioner& m) {
    cfg = &m.cfg;
    e = m.cfg.width;
    dh = m.cfg.head_dim();
    heads = m.cfg.heads;
    layers = m.cfg.layers;
    ffn = m.cfg.ffn_width;
    vocab = m.vocab.size();
    inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    auto at = [&m](const std::string& name) { return m.params.at(name).data.data(); };
    tok_emb = at("dec.tok_emb");
    dec_pos = at("dec.pos");
    head = at("head.w");
    for (size_t l = 0; l < layers; ++l) {
      std::string base = "dec" + std::to_string(l);
      Layer lay;
      for (size_t h = 0; h < heads; ++h) {
        std::string hh = std::to_string(h);
        lay.self_q.push_back(at(base + ".self.q" + hh));
        lay.self_k.push_back(at(base + ".self.k" + hh));
        lay.self_v.push_back(at(base + ".self.v" + hh));
        lay.cross_q.push_back(at(base + ".cross.q" + hh));
        lay.cross_k.push_back(at(base + ".cross.k" + hh));
        lay.cross_v.push_back(at(base + ".cross.v" + hh));
      }
      lay.self_out = at(base + ".self.out");
      lay.cross_out = at(base + ".cross.out");
      lay.ffn_w1 = at(base + ".ffn.w1");
      lay.ffn_b1 = at(base + ".ffn.b1");
      lay.ffn_w2 = at(base + ".ffn.w2");
      lay.ffn_b2 = at(base + ".ffn.b2");
      lay.ln1g = at(base + ".ln1.g");
      lay.ln1b = at(base + ".ln1.b");
      lay.ln2g = at(base + ".ln2.g");
      lay.ln2b = at(base + ".ln2.b");
      lay.ln3g = at(base + ".ln3.g");
      lay.ln3b = at(base + ".ln3.b");
    }
  }
};

// Per-image constants: patch memory and per-layer cross keys/values, head
// blocks side by side ([P x E]).
struct EncodedImage {
  size_t p;
  Tensor memory;
  std::vector<std::vector<double>> cross_k, cross_v;

  EncodedImage(const Captioner& m, const ModelView& view, const ImageGrid& image)
      : p(m.cfg.patches()) {
    memory = encode_image(m, image);
    cross_k.assign(view.layers, std::vector<double>(p * view.e));
    cross_v.assign(view.layers, std::vector<double>(p * view.e));
    std::vector<double> tmp(p * view.dh);
    for (size_t l = 0; l < view.layers; ++l)
      for (size_t h = 0; h < view.heads; ++h) {
        matmul_into(memory.data.data(), p, view.e, view.layer[l].cross_k[h], view.dh, tmp.data());
        for (size_t r = 0; r < p; ++r)
          std::memcpy(cross_k[l].data() + r * view.e + h * view.dh, tmp.data() + r * view.dh,
                      view.dh * sizeof(double));
        matmul_into(memory.data.data(), p, view.e, view.layer[l].cross_v[h], view.dh, tmp.data());
        for (size_t r = 0; r < p; ++r)
          std::memcpy(cross_v[l].data() + r * view.e + h * view.dh, tmp.data() + r * view.dh,
                      view.dh * sizeof(double));
      }
  }
};

// Grown per decoded position: self-attention keys/values per layer.
struct BeamCache {
  std::vector<std::vector<double>> k, v;  // [layers], rows of E per position
  size_t len = 0;

  void init(size_t layers, size_t e, size_t max_len) {
    k.assign(layers, {});
    v.assign(layers, {});
    for (size_t l = 0; l < layers; ++l) {
      k[l].reserve(max_len * e);
      v[l].reserve(max_len * e);
    }
    len = 0;
  }
};

// One decoder step: consumes `token` at `pos`, appends to the cache, writes
// next-token logits. Mirrors the taped forward op for op.
void decoder_step(const ModelView& mv, const EncodedImage& enc, BeamCache& cache, int token,
                  size_t pos, std::vector<double>& logits) {
  const size_t e = mv.e, dh = mv.dh;
  std::vector<double> x(e), q(dh), att, ctx(e), tmp(e), h1(mv.ffn);
  for (size_t j = 0; j < e; ++j)
    x[j] = mv.tok_emb[static_cast<size_t>(token) * e + j] + mv.dec_pos[pos * e + j];

  for (size_t l = 0; l < mv.layers; ++l) {
    const auto& lay = mv.layer[l];
    auto& kc = cache.k[l];
    auto& vc = cache.v[l];
    kc.resize((cache.len + 1) * e);
    vc.resize((cache.len + 1) * e);
    // project and append this position's keys/values, then attend
    for (size_t h = 0; h < mv.heads; ++h) {
      matmul_into(x.data(), 1, e, lay.self_k[h], dh, kc.data() + cache.len * e + h * dh);
      matmul_into(x.data(), 1, e, lay.self_v[h], dh, vc.data() + cache.len * e + h * dh);
    }
    size_t t_count = cache.len + 1;
    att.resize(t_count);
    for (size_t h = 0; h < mv.heads; ++h) {
      matmul_into(x.data(), 1, e, lay.self_q[h], dh, q.data());
      for (size_t t = 0; t < t_count; ++t) {
        double s = 0.0;
        const double* krow = kc.data() + t * e + h * dh;
        for (size_t j = 0; j < dh; ++j) s += q[j] * krow[j];
        att[t] = s * mv.inv_sqrt_dh;
      }
      softmax_row(att.data(), t_count, att.data());
      for (size_t j = 0; j < dh; ++j) {
        double s = 0.0;
        for (size_t t = 0; t < t_count; ++t) s += att[t] * vc[t * e + h * dh + j];
        ctx[h * dh + j] = s;
      }
    }
    matmul_into(ctx.data(), 1, e, lay.self_out, e, tmp.data());
    for (size_t j = 0; j < e; ++j) tmp[j] += x[j];
    layer_norm_row(tmp.data(), e, lay.ln1g, lay.ln1b, x.data());

    att.resize(enc.p);
    for (size_t h = 0; h < mv.heads; ++h) {
      matmul_into(x.data(), 1, e, lay.cross_q[h], dh, q.data());
      const auto& ck = enc.cross_k[l];
      const auto& cv = enc.cross_v[l];
      for (size_t t = 0; t < enc.p; ++t) {
        double s = 0.0;
        const double* krow = ck.data() + t * e + h * dh;
        for (size_t j = 0; j < dh; ++j) s += q[j] * krow[j];
        att[t] = s * mv.inv_sqrt_dh;
      }
      softmax_row(att.data(), enc.p, att.data());
      for (size_t j = 0; j < dh; ++j) {
        double s = 0.0;
        for (size_t t = 0; t < enc.p; ++t) s += att[t] * cv[t * e + h * dh + j];
        ctx[h * dh + j] = s;
      }
    }
    matmul_into(ctx.data(), 1, e, lay.cross_out, e, tmp.data());
    for (size_t j = 0; j < e; ++j) tmp[j] += x[j];
    layer_norm_row(tmp.data(), e, lay.ln2g, lay.ln2b, x.data());

    matmul_into(x.data(), 1, e, lay.ffn_w1, mv.ffn, h1.data());
    for (size_t j = 0; j < mv.ffn; ++j) {
      h1[j] += lay.ffn_b1[j];
      if (h1[j] < 0.0) h1[j] = 0.0;
    }
    matmul_into(h1.data(), 1, mv.ffn, lay.ffn_w2, e, tmp.data());
    for (size_t j = 0; j < e; ++j) tmp[j] += lay.ffn_b2[j] + x[j];
    layer_norm_row(tmp.data(), e, lay.ln3g, lay.ln3b, x.data());
  }
  cache.len += 1;

  logits.resize(mv.vocab);
  for (size_t t = 0; t < mv.vocab; ++t) {
    double s = 0.0;
    const double* row = mv.head + t * e;
    for (size_t j = 0; j < e; ++j) s += x[j] * row[j];
    logits[t] = s;
  }
}

void log_softmax_inplace(std::vector<double>& v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  double lse = mx + std::log(sum);
  for (double& x : v) x -= lse;
}

struct Hypothesis {
  std::vector<int> tokens;
  double score = 0.0;  // accumulated (diversity-penalized) log-probability
  BeamCache cache;
  std::vector<double> next_logp;  // log-probs for the next position
};

struct FinishedHyp {
  std::vector<int> tokens;
  double score = 0.0;

  double normalized() const {
    return score / static_cast<double>(std::max<size_t>(1, tokens.size()));
  }
};

bool lex_less(const std::vector<int>& a, const std::vector<int>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Normalized-score comparison; ties prefer the lexicographically smaller
// token sequence.
bool better_finished(const FinishedHyp& a, const FinishedHyp& b) {
  if (a.normalized() != b.normalized()) return a.normalized() > b.normalized();
  return lex_less(a.tokens, b.tokens);
}

struct GroupState {
  std::vector<Hypothesis> live;
  std::vector<FinishedHyp> finished;
};

Report ids_to_report(const Captioner& m, const std::vector<int>& ids) { return m.decode_ids(ids); }

// Shared engine for beam and diverse beam. Groups are decoded sequentially
// per step; group g's candidate scores subtract penalty * (count of the same
// token already chosen at this step by groups before g).
DecodeResult diverse_beam_core(const Captioner& m, const ImageGrid& image, size_t width,
                               size_t groups, double penalty, size_t max_len) {
  ModelView view(m);
  EncodedImage enc(m, view, image);
  size_t per_group = width / groups;

  std::vector<GroupState> gs(groups);
  for (auto& g : gs) {
    Hypothesis h;
    h.cache.init(view.layers, view.e, max_len);
    std::vector<double> logits;
    decoder_step(view, enc, h.cache, kBosId, 0, logits);
    log_softmax_inplace(logits);
    h.next_logp = std::move(logits);
    g.live.push_back(std::move(h));
  }

  struct Candidate {
    size_t hyp;
    int token;
    double score;  // accumulated penalized score if chosen
  };

  for (size_t step = 0; step < max_len; ++step) {
    std::map<int, int> step_counts;  // token -> picks by earlier groups this step
    bool any_live = false;
    for (size_t g = 0; g < groups; ++g) {
      auto& group = gs[g];
      if (group.live.empty()) continue;
      any_live = true;

      std::vector<Candidate> cands;
      cands.reserve(group.live.size() * view.vocab);
      for (size_t hi = 0; hi < group.live.size(); ++hi) {
        const auto& h = group.live[hi];
        for (size_t tok = 0; tok < view.vocab; ++tok) {
          double pen = 0.0;
          if (penalty > 0.0) {
            auto it = step_counts.find(static_cast<int>(tok));
            if (it != step_counts.end()) pen = penalty * it->second;
          }
          cands.push_back({hi, static_cast<int>(tok), h.score + h.next_logp[tok] - pen});
        }
      }
      size_t keep = std::min(per_group, cands.size());
      std::partial_sort(cands.begin(), cands.begin() + static_cast<long>(keep), cands.end(),
                        [&group](const Candidate& a, const Candidate& b) {
                          if (a.score != b.score) return a.score > b.score;
                          std::vector<int> sa = group.live[a.hyp].tokens;
                          sa.push_back(a.token);
                          std::vector<int> sb = group.live[b.hyp].tokens;
                          sb.push_back(b.token);
                          return lex_less(sa, sb);
                        });
      cands.resize(keep);

      std::vector<Hypothesis> next_live;
      for (auto& c : cands) {
        step_counts[c.token] += 1;
        std::vector<int> seq = group.live[c.hyp].tokens;
        seq.push_back(c.token);
        if (c.token == kEosId) {
          group.finished.push_back({std::move(seq), c.score});
          continue;
        }
        if (seq.size() >= max_len) {
          // ran out of positions; finalize as-is
          group.finished.push_back({std::move(seq), c.score});
          continue;
        }
        Hypothesis h;
        h.tokens = std::move(seq);
        h.score = c.score;
        h.cache = group.live[c.hyp].cache;  // branch: copy cached keys/values
        std::vector<double> logits;
        decoder_step(view, enc, h.cache, c.token, h.tokens.size(), logits);
        log_softmax_inplace(logits);
        h.next_logp = std::move(logits);
        next_live.push_back(std::move(h));
      }
      group.live = std::move(next_live);
    }
    if (!any_live) break;
  }

  DecodeResult out;
  FinishedHyp best_overall;
  bool have_overall = false;
  for (auto& g : gs) {
    // anything still live hit max_len positions without finalizing
    for (auto& h : g.live) g.finished.push_back({h.tokens, h.score});
    if (g.finished.empty()) continue;
    FinishedHyp best = g.finished[0];
    for (const auto& f : g.finished)
      if (better_finished(f, best)) best = f;
    out.group_tops.push_back(ids_to_report(m, best.tokens));
    if (!have_overall || better_finished(best, best_overall)) {
      best_overall = best;
      have_overall = true;
    }
  }
  out.top = ids_to_report(m, best_overall.tokens);
  return out;
}

}  // namespace

Report decode_greedy(const Captioner& m, const ImageGrid& image, const DecodeConfig& cfg) {
  ModelView view(m);
  EncodedImage enc(m, view, image);
  BeamCache cache;
  cache.init(view.layers, view.e, cfg.max_len);
  std::vector<int> tokens;
  std::vector<double> logits;
  int prev = kBosId;
  for (size_t pos = 0; pos < cfg.max_len; ++pos) {
    decoder_step(view, enc, cache, prev, pos, logits);
    int best = 0;
    for (size_t t = 1; t < logits.size(); ++t)
      if (logits[t] > logits[best]) best = static_cast<int>(t);  // ties keep lowest index
    tokens.push_back(best);
    if (best == kEosId) break;
    prev = best;
  }
  return m.decode_ids(tokens);
}

Report decode_beam(const Captioner& m, const ImageGrid& image, const DecodeConfig& cfg) {
  cfg.validate();
  return diverse_beam_core(m, image, cfg.beam_width, 1, 0.0, cfg.max_len).top;
}

DecodeResult decode_diverse_beam(const Captioner& m, const ImageGrid& image,
                                 const DecodeConfig& cfg) {
  cfg.validate();
  return diverse_beam_core(m, image, cfg.beam_width, cfg.groups, cfg.diversity_penalty,
                           cfg.max_len);
}

DecodeResult decode_report(const Captioner& m, const ImageGrid& image, const DecodeConfig& cfg) {
  cfg.validate();
  switch (cfg.strategy) {
    case DecodeConfig::Strategy::Greedy: {
      DecodeResult r;
      r.top = decode_greedy(m, image, cfg);
      r.group_tops = {r.top};
      return r;
    }
    case DecodeConfig::Strategy::Beam: {
      DecodeResult r;
      r.top = decode_beam(m, image, cfg);
      r.group_tops = {r.top};
      return r;
    }
    case DecodeConfig::Strategy::DiverseBeam:
      return decode_diverse_beam(m, image, cfg);
  }
  throw ContractError("unreachable decode strategy");
}

std::vector<DecodeResult> decode_batch(const Captioner& m, const std::vector<ImageGrid>& images,
                                       const DecodeConfig& cfg, int threads) {
  cfg.validate();
  std::vector<DecodeResult> out(images.size());
  parallel_for(images.size(), threads, [&](size_t i) { out[i] = decode_report(m, images[i], cfg); });
  return out;
}

struct SequenceScorer::Impl {
  const Captioner* model;
  ModelView view;
  EncodedImage enc;
  BeamCache cache;
  std::vector<double> logits;
  size_t pos = 0;

  Impl(const Captioner& m, const ImageGrid& image) : model(&m), view(m), enc(m, view, image) {
    cache.init(view.layers, view.e, m.cfg.max_len);
  }
};

SequenceScorer::SequenceScorer(const Captioner& m, const ImageGrid& image)
    : impl_(std::make_unique<Impl>(m, image)) {}
SequenceScorer::~SequenceScorer() = default;
SequenceScorer::SequenceScorer(SequenceScorer&&) noexcept = default;
SequenceScorer& SequenceScorer::operator=(SequenceScorer&&) noexcept = default;

const std::vector<double>& SequenceScorer::feed(int token_id) {
  if (token_id < 0 || static_cast<size_t>(token_id) >= impl_->view.vocab)
    throw IndexError("token id out of vocabulary: " + std::to_string(token_id));
  if (impl_->pos >= impl_->model->cfg.max_len)
    throw ContractError("sequence longer than max_len");
  decoder_step(impl_->view, impl_->enc, impl_->cache, token_id, impl_->pos, impl_->logits);
  impl_->pos += 1;
  return impl_->logits;
}

void SequenceScorer::reset() {
  impl_->cache.init(impl_->view.layers, impl_->view.e, impl_->model->cfg.max_len);
  impl_->pos = 0;
}

size_t SequenceScorer::position() const { return impl_->pos; }

double sequence_log_prob(const Captioner& m, const ImageGrid& image, const Report& tokens) {
  if (tokens.size() < 2 || tokens.front() != kBosTok || tokens.back() != kEosTok)
    throw ContractError("sequence_log_prob expects BOS ... EOS");
  if (tokens.size() > m.cfg.max_len + 1)
    throw ContractError("sequence longer than max decode length");
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    int id = m.vocab.id(t);
    if (id < 0) throw IndexError("token not in vocabulary: " + t);
    ids.push_back(id);
  }
  SequenceScorer scorer(m, image);
  double total = 0.0;
  for (size_t i = 0; i + 1 < ids.size(); ++i) {
    std::vector<double> logp = scorer.feed(ids[i]);
    log_softmax_inplace(logp);
    total += logp[static_cast<size_t>(ids[i + 1])];
  }
  return total;
}

}  // namespace adalab
