#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "adalab/grammar.hpp"
#include "adalab/ontology.hpp"
#include "adalab/tensor.hpp"

namespace adalab {

// Square grayscale image, pixels in [0, 1], row-major.
struct ImageGrid {
  uint16_t g = 0;
  std::vector<double> px;

  static ImageGrid filled(uint16_t g, double v);
  double& at(size_t r, size_t c) { return px[r * g + c]; }
  double at(size_t r, size_t c) const { return px[r * g + c]; }
  bool in_range() const;

  Tensor to_tensor() const;
  static ImageGrid from_tensor(const Tensor& t);
  bool operator==(const ImageGrid&) const = default;
};

// Pixel encoding of the victim-domain distribution: baseline thorax geometry
// plus one visual signature per present finding; additive noise sigma = 0.02,
// clamped to [0, 1].
ImageGrid render_image(const FindingVector& v, std::mt19937_64& rng, uint16_t g = 32);

struct PrevalenceProfile {
  std::array<double, kFindingCount> p{};
  static PrevalenceProfile uniform(double prob);
};

struct Case {
  FindingVector findings;
  ImageGrid image;
  Report report;
};

Case sample_case(std::mt19937_64& rng, const PrevalenceProfile& prev, uint16_t g = 32);

enum class AttackerImageKind { Natural, Medical, Noise, Mix };

AttackerImageKind attacker_kind_from_string(const std::string& s);
std::string attacker_kind_to_string(AttackerImageKind k);

// Attacker-side image source. natural = geometric collage ignoring thorax
// composition; medical = render of a sampled finding vector; noise = i.i.d.
// standard normal scaled affinely to [0, 1]; mix = medical with probability
// `mix_ratio`, else natural. Exactly one engine draw is consumed per call, so
// mix(0) reproduces natural and mix(1) reproduces medical bit for bit.
ImageGrid sample_attacker_image(AttackerImageKind kind, double mix_ratio, std::mt19937_64& rng,
                                uint16_t g = 32);

}  // namespace adalab
