#pragma once

#include <memory>
#include <string>
#include <vector>

#include "adalab/captioner.hpp"

namespace adalab {

struct DecodeConfig {
  enum class Strategy { Greedy, Beam, DiverseBeam };

  Strategy strategy = Strategy::DiverseBeam;
  size_t beam_width = 18;
  size_t groups = 3;
  double diversity_penalty = 0.2;
  size_t max_len = 24;

  void validate() const;
  static Strategy strategy_from_string(const std::string& s);
  static std::string strategy_to_string(Strategy s);
};

struct DecodeResult {
  Report top;                      // top-1 overall
  std::vector<Report> group_tops;  // one per beam group (single entry otherwise)
};

DecodeResult decode_report(const Captioner& m, const ImageGrid& image, const DecodeConfig& cfg);
Report decode_greedy(const Captioner& m, const ImageGrid& image, const DecodeConfig& cfg);
Report decode_beam(const Captioner& m, const ImageGrid& image, const DecodeConfig& cfg);
DecodeResult decode_diverse_beam(const Captioner& m, const ImageGrid& image,
                                 const DecodeConfig& cfg);

// Batch decode over read-only parameters; result order matches input order.
std::vector<DecodeResult> decode_batch(const Captioner& m, const std::vector<ImageGrid>& images,
                                       const DecodeConfig& cfg, int threads);

// Incremental teacher-forced forward over one image, for scoring and tests.
// feed() consumes the token at the next position and returns the logits row
// predicting the following token. Forward values match the taped path
// exactly.
class SequenceScorer {
 public:
  SequenceScorer(const Captioner& m, const ImageGrid& image);
  ~SequenceScorer();
  SequenceScorer(SequenceScorer&&) noexcept;
  SequenceScorer& operator=(SequenceScorer&&) noexcept;

  const std::vector<double>& feed(int token_id);
  void reset();
  size_t position() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace adalab
