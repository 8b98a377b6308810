#include "adalab/imaging.hpp"

#include <algorithm>
#include <cmath>

#include "adalab/common.hpp"

namespace adalab {

namespace {

constexpr double kRenderNoiseSigma = 0.02;

enum : uint64_t {
  kTagVector = 0x76656374,
  kTagRender = 0x72656e64,
  kTagReport = 0x72657074,
  kTagNatural = 0x6e617475,
  kTagNoise = 0x6e6f6973,
  kTagMixPick = 0x6d697870,
};

void paint_max(ImageGrid& im, int r, int c, double v) {
  if (r < 0 || c < 0 || r >= im.g || c >= im.g) return;
  double& p = im.at(static_cast<size_t>(r), static_cast<size_t>(c));
  p = std::max(p, v);
}

void paint_set(ImageGrid& im, int r, int c, double v) {
  if (r < 0 || c < 0 || r >= im.g || c >= im.g) return;
  im.at(static_cast<size_t>(r), static_cast<size_t>(c)) = v;
}

void fill_ellipse(ImageGrid& im, double cr, double cc, double ar, double ac, double v,
                  bool overwrite = false) {
  int r0 = static_cast<int>(std::floor(cr - ar)), r1 = static_cast<int>(std::ceil(cr + ar));
  int c0 = static_cast<int>(std::floor(cc - ac)), c1 = static_cast<int>(std::ceil(cc + ac));
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      double dr = (r - cr) / ar, dc = (c - cc) / ac;
      if (dr * dr + dc * dc <= 1.0) {
        if (overwrite)
          paint_set(im, r, c, v);
        else
          paint_max(im, r, c, v);
      }
    }
}

}  // namespace

ImageGrid ImageGrid::filled(uint16_t g, double v) {
  ImageGrid im;
  im.g = g;
  im.px.assign(static_cast<size_t>(g) * g, v);
  return im;
}

bool ImageGrid::in_range() const {
  for (double v : px)
    if (!(v >= 0.0 && v <= 1.0)) return false;
  return true;
}

Tensor ImageGrid::to_tensor() const {
  Tensor t = Tensor::zeros({g, g});
  t.data = px;
  return t;
}

ImageGrid ImageGrid::from_tensor(const Tensor& t) {
  if (t.ndim() != 2 || t.shape[0] != t.shape[1])
    throw ShapeError("image tensor must be square, got " + shape_str(t));
  ImageGrid im;
  im.g = static_cast<uint16_t>(t.shape[0]);
  im.px = t.data;
  return im;
}

PrevalenceProfile PrevalenceProfile::uniform(double prob) {
  PrevalenceProfile pr;
  pr.p.fill(prob);
  return pr;
}

ImageGrid render_image(const FindingVector& v, std::mt19937_64& rng, uint16_t g) {
  const double s = g / 32.0;
  auto S = [s](double x) { return static_cast<int>(std::lround(x * s)); };
  ImageGrid im = ImageGrid::filled(g, 0.08);

  // lateral chest margins
  for (int r = S(5); r <= S(27); ++r) {
    paint_max(im, r, S(2), 0.25);
    paint_max(im, r, g - 1 - S(2), 0.25);
  }
  // ribs
  for (int rib : {7, 11, 15, 19})
    for (int c = S(3); c <= g - 1 - S(3); ++c) paint_max(im, S(rib), c, 0.22);

  bool deviation = v.present[0], opacity = v.present[1], effusion = v.present[2];
  bool cardiomegaly = v.present[3], elevation = v.present[4], blunting = v.present[5];
  bool device = v.present[6], fracture = v.present[7];

  if (fracture) {
    for (int c = S(5); c <= S(7); ++c) {
      paint_set(im, S(11), c, 0.08);  // rib gap
      paint_max(im, S(12), c, 0.7);
      paint_max(im, S(13), c, 0.7);
    }
  }

  // diaphragm dome
  int base = elevation ? S(21) : S(24);
  for (int c = S(3); c <= g - 1 - S(3); ++c) {
    double t = (c - S(3)) / static_cast<double>(g - 1 - 2 * S(3));
    int r = base - static_cast<int>(std::lround(2.0 * s * std::sin(t * 3.14159265358979)));
    paint_max(im, r, c, 0.45);
    paint_max(im, r + 1, c, 0.3);
  }

  if (blunting) {
    for (int r = S(25); r <= S(27); ++r)
      for (int c = S(3); c <= S(3) + (r - S(25)); ++c) paint_max(im, r, c, 0.5);
  }
  if (effusion) {
    for (int r = S(25); r <= S(27); ++r)
      for (int c = g - 1 - S(3); c >= g - 1 - S(3) - 2 * (r - S(24)); --c)
        paint_max(im, r, c, 0.5);
  }

  // cardiac silhouette; width ratio relative to the inner thorax
  double thorax = g - 2.0 * S(2) - 2.0;
  double semi_a = (cardiomegaly ? 0.275 : 0.165) * thorax;
  fill_ellipse(im, S(18), S(16), 3.2 * s, semi_a, 0.55);

  // trachea
  int tcol = deviation ? S(19) : S(16);
  for (int r = S(2); r <= S(6); ++r) paint_max(im, r, tcol, 0.5);

  if (opacity) {
    std::uniform_int_distribution<int> jitter(-1, 1);
    int jr = jitter(rng), jc = jitter(rng);
    fill_ellipse(im, S(9) + jr, S(8) + jc, 2.6 * s, 2.6 * s, 0.55);
  }
  if (device) {
    for (int r = S(4); r <= S(5); ++r)
      for (int c = S(23); c <= S(27); ++c) paint_set(im, r, c, 0.95);
    for (int k = 0; k < S(5); ++k) paint_max(im, S(6) + k, S(25) - k, 0.8);
  }

  std::normal_distribution<double> noise(0.0, kRenderNoiseSigma);
  for (double& p : im.px) p = std::clamp(p + noise(rng), 0.0, 1.0);
  return im;
}

Case sample_case(std::mt19937_64& rng, const PrevalenceProfile& prev, uint16_t g) {
  uint64_t s = rng();
  Case c;
  auto vec_rng = derive_rng(s, {kTagVector});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int f = 0; f < kFindingCount; ++f) {
    double p = prev.p[static_cast<size_t>(f)];
    if (p < 0.0 || p > 1.0) throw ContractError("prevalence must lie in [0, 1]");
    c.findings.present[static_cast<size_t>(f)] = u(vec_rng) < p;
  }
  auto img_rng = derive_rng(s, {kTagRender});
  c.image = render_image(c.findings, img_rng, g);
  auto rep_rng = derive_rng(s, {kTagReport});
  c.report = realize_report(c.findings, rep_rng);
  return c;
}

AttackerImageKind attacker_kind_from_string(const std::string& s) {
  if (s == "natural") return AttackerImageKind::Natural;
  if (s == "medical") return AttackerImageKind::Medical;
  if (s == "noise") return AttackerImageKind::Noise;
  if (s == "mix") return AttackerImageKind::Mix;
  throw ValidationError("unknown attacker image kind: " + s);
}

std::string attacker_kind_to_string(AttackerImageKind k) {
  switch (k) {
    case AttackerImageKind::Natural: return "natural";
    case AttackerImageKind::Medical: return "medical";
    case AttackerImageKind::Noise: return "noise";
    case AttackerImageKind::Mix: return "mix";
  }
  return "?";
}

namespace {

ImageGrid natural_collage(uint64_t seed, uint16_t g) {
  auto rng = derive_rng(seed, {kTagNatural});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageGrid im = ImageGrid::filled(g, 0.02 + 0.23 * u(rng));
  int shapes = 3 + static_cast<int>(rng() % 6);
  for (int i = 0; i < shapes; ++i) {
    double intensity = 0.15 + 0.8 * u(rng);
    int kind = static_cast<int>(rng() % 4);
    double cr = u(rng) * g, cc = u(rng) * g;
    double ar = 1.5 + u(rng) * g * 0.25, ac = 1.5 + u(rng) * g * 0.25;
    if (kind == 0) {  // filled ellipse
      fill_ellipse(im, cr, cc, ar, ac, intensity, /*overwrite=*/true);
    } else if (kind == 1) {  // rectangle
      int r0 = static_cast<int>(cr - ar / 2), r1 = static_cast<int>(cr + ar / 2);
      int c0 = static_cast<int>(cc - ac / 2), c1 = static_cast<int>(cc + ac / 2);
      for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) paint_set(im, r, c, intensity);
    } else if (kind == 2) {  // line segment
      double dr = u(rng) * 2 - 1, dc = u(rng) * 2 - 1;
      double norm = std::max(1e-9, std::sqrt(dr * dr + dc * dc));
      int len = 4 + static_cast<int>(rng() % g);
      for (int k = 0; k < len; ++k)
        paint_set(im, static_cast<int>(cr + dr / norm * k), static_cast<int>(cc + dc / norm * k),
                  intensity);
    } else {  // ring
      double rad = 2.0 + u(rng) * g * 0.2;
      for (int deg = 0; deg < 360; deg += 4) {
        double a = deg * 3.14159265358979 / 180.0;
        paint_set(im, static_cast<int>(cr + rad * std::sin(a)),
                  static_cast<int>(cc + rad * std::cos(a)), intensity);
      }
    }
  }
  for (double& p : im.px) p = std::clamp(p, 0.0, 1.0);
  return im;
}

ImageGrid medical_analog(uint64_t seed, uint16_t g) {
  auto vrng = derive_rng(seed, {kTagVector});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FindingVector v;
  for (int f = 0; f < kFindingCount; ++f) v.present[static_cast<size_t>(f)] = u(vrng) < 0.3;
  auto irng = derive_rng(seed, {kTagRender});
  return render_image(v, irng, g);
}

ImageGrid noise_image(uint64_t seed, uint16_t g) {
  auto rng = derive_rng(seed, {kTagNoise});
  std::normal_distribution<double> z(0.0, 1.0);
  ImageGrid im = ImageGrid::filled(g, 0.0);
  for (double& p : im.px) p = z(rng);
  double lo = im.px[0], hi = im.px[0];
  for (double p : im.px) {
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  double span = hi - lo;
  for (double& p : im.px) p = span > 0 ? (p - lo) / span : 0.5;
  return im;
}

}  // namespace

ImageGrid sample_attacker_image(AttackerImageKind kind, double mix_ratio, std::mt19937_64& rng,
                                uint16_t g) {
  if (kind == AttackerImageKind::Mix && (mix_ratio < 0.0 || mix_ratio > 1.0))
    throw ContractError("mix ratio must lie in [0, 1]");
  uint64_t s = rng();
  switch (kind) {
    case AttackerImageKind::Natural:
      return natural_collage(s, g);
    case AttackerImageKind::Medical:
      return medical_analog(s, g);
    case AttackerImageKind::Noise:
      return noise_image(s, g);
    case AttackerImageKind::Mix: {
      auto pick = derive_rng(s, {kTagMixPick});
      double u = std::uniform_real_distribution<double>(0.0, 1.0)(pick);
      return u < mix_ratio ? medical_analog(s, g) : natural_collage(s, g);
    }
  }
  throw ContractError("unreachable attacker image kind");
}

}  // namespace adalab
