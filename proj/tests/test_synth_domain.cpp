#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "adalab/common.hpp"
#include "adalab/grammar.hpp"
#include "adalab/imaging.hpp"
#include "adalab/ontology.hpp"

using namespace adalab;

namespace {

// Enumerate every concrete sentence a pattern can produce.
std::vector<std::vector<std::string>> realizations(const TemplatePattern& p) {
  std::vector<std::vector<std::string>> out = {{}};
  for (const auto& slot : p.slots) {
    std::vector<std::vector<std::string>> next;
    for (const auto& partial : out)
      for (const auto& w : slot) {
        auto copy = partial;
        copy.push_back(w);
        next.push_back(std::move(copy));
      }
    out = std::move(next);
  }
  return out;
}

double cardiac_width_ratio(const ImageGrid& im) {
  // geometric measurement: bright run on the cardiac center row
  int row = static_cast<int>(std::lround(18.0 * im.g / 32.0));
  int margin = static_cast<int>(std::lround(2.0 * im.g / 32.0));
  int count = 0;
  for (int c = margin + 1; c <= im.g - margin - 2; ++c)
    if (im.at(static_cast<size_t>(row), static_cast<size_t>(c)) > 0.40) ++count;
  double thorax = im.g - 2.0 * margin - 2.0;
  return count / thorax;
}

}  // namespace

TEST_SUITE_BEGIN("synth_domain");

TEST_CASE("ontology shape") {
  CHECK(kRegionCount == 5);
  CHECK(kFindingCount == 8);
  std::set<std::string> names;
  for (const auto& f : findings()) {
    names.insert(f.name);
    CHECK(f.region >= 0);
    CHECK(f.region < kRegionCount);
  }
  CHECK(names.size() == kFindingCount);  // unique across the ontology
  int total = 0;
  for (int r = 0; r < kRegionCount; ++r) {
    CHECK(!region_findings(r).empty());
    total += static_cast<int>(region_findings(r).size());
  }
  CHECK(total == kFindingCount);
}

TEST_CASE("grammar round-trip exact over all vectors and template seeds") {
  for (unsigned bits = 0; bits < 256; ++bits) {
    FindingVector v = FindingVector::from_bits(bits);
    for (uint64_t seed = 0; seed < 3; ++seed) {
      auto rng = derive_rng(seed, {bits});
      Report r = realize_report(v, rng);
      CHECK(parse_report(r) == graph_of(v));
    }
  }
}

TEST_CASE("template recognition is unambiguous across region states") {
  std::map<std::vector<std::string>, std::pair<int, unsigned>> seen;
  for (const auto& rst : grammar_templates())
    for (const auto& p : rst.patterns)
      for (auto& sentence : realizations(p)) {
        auto it = seen.find(sentence);
        if (it != seen.end()) {
          INFO("sentence maps to two states: ", sentence[0], " ", sentence[1], " ", sentence[2]);
          CHECK(it->second == std::make_pair(rst.region, rst.state_mask));
        } else {
          seen.emplace(sentence, std::make_pair(rst.region, rst.state_mask));
        }
      }
  CHECK(seen.size() >= 40);
}

TEST_CASE("every region state has at least three realizable sentences") {
  for (const auto& rst : grammar_templates()) {
    size_t n = 0;
    for (const auto& p : rst.patterns) n += realizations(p).size();
    INFO("region ", rst.region, " state ", rst.state_mask);
    CHECK(n >= 3);
  }
}

TEST_CASE("lexicon covers templates and stays near 200 words") {
  const auto& lex = lexicon();
  CHECK(lex.size() >= 150);
  CHECK(lex.size() <= 250);
  CHECK(lexicon_id(kPadTok) == 0);
  CHECK(lexicon_id(kBosTok) == 1);
  CHECK(lexicon_id(kEosTok) == 2);
  CHECK(lexicon_id(kUnkTok) == 3);
  for (const auto& rst : grammar_templates())
    for (const auto& p : rst.patterns)
      for (const auto& slot : p.slots)
        for (const auto& w : slot) CHECK(lexicon_id(w) >= 0);
  std::set<std::string> dedup(lex.begin(), lex.end());
  CHECK(dedup.size() == lex.size());
}

TEST_CASE("realize_report shapes") {
  FindingVector normal;
  auto rng = derive_rng(1);
  Report r = realize_report(normal, rng);
  CHECK(std::count(r.begin(), r.end(), std::string(kPeriodTok)) == 5);
  CHECK(r.back() == kEosTok);
  CHECK(r.size() <= max_grammar_report_length());
  // all-present vector: every region uses its abnormal template family
  FindingVector all = FindingVector::from_bits(0xff);
  auto rng2 = derive_rng(2);
  Report ra = realize_report(all, rng2);
  CHECK(parse_report(ra) == graph_of(all));

  // degenerate ontology fixture: no regions -> EOS only
  auto rng3 = derive_rng(3);
  Report empty = realize_report_for_regions(normal, rng3, {});
  CHECK(empty == Report{kEosTok});
}

TEST_CASE("parse_report tolerates junk and partial corruption") {
  Report junk = {"the", "the", "the", "the"};
  CHECK(parse_report(junk).empty());

  // three recognizable sentences, two corrupted ones
  Report mixed = {"trachea", "is",   "midline", ".",    "glorp", "blip",   "zap", ".",
                  "heart",   "size", "normal",  ".",    "qq",    ".",      "no",  "support",
                  "devices", ".",    kEosTok};
  FindingGraph g = parse_report(mixed);
  FindingGraph want;
  for (int f : {0, 3, 6, 7}) {
    want.entities.insert({finding_region(f), f, false});
    want.relations.insert({f, false, finding_region(f)});
  }
  CHECK(g == want);
}

TEST_CASE("parse_report first recognized sentence per region wins") {
  Report conflicting = {"heart", "is", "enlarged", ".", "heart", "size", "normal", ".", kEosTok};
  FindingGraph g = parse_report(conflicting);
  CHECK(g.entities.count({kCardiac, 3, true}) == 1);
  CHECK(g.entities.count({kCardiac, 3, false}) == 0);
}

TEST_CASE("render_image determinism and range") {
  FindingVector normal;
  auto r1 = derive_rng(7), r2 = derive_rng(7);
  ImageGrid a = render_image(normal, r1);
  ImageGrid b = render_image(normal, r2);
  CHECK(a == b);
  CHECK(a.in_range());
  FindingVector all = FindingVector::from_bits(0xff);
  auto r3 = derive_rng(8);
  ImageGrid c = render_image(all, r3);
  CHECK(c.in_range());
}

TEST_CASE("cardiac ellipse width ratio separates cardiomegaly") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    FindingVector v;
    auto rng = derive_rng(seed, {100});
    ImageGrid plain = render_image(v, rng);
    CHECK(cardiac_width_ratio(plain) < 0.4);
    v.present[3] = 1;
    auto rng2 = derive_rng(seed, {101});
    ImageGrid big = render_image(v, rng2);
    CHECK(cardiac_width_ratio(big) > 0.5);
  }
}

TEST_CASE("sample_case degenerate and default prevalence") {
  auto rng = derive_rng(11);
  Case c0 = sample_case(rng, PrevalenceProfile::uniform(0.0));
  CHECK(c0.findings.bits() == 0);
  CHECK(std::count(c0.report.begin(), c0.report.end(), std::string(kPeriodTok)) == 5);
  Case c1 = sample_case(rng, PrevalenceProfile::uniform(1.0));
  CHECK(c1.findings.bits() == 0xffu);

  // frequency oracle: 10k samples within +-1.5% of 0.3
  auto rng2 = derive_rng(12);
  std::array<int, kFindingCount> counts{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    Case c = sample_case(rng2, PrevalenceProfile::uniform(0.3));
    for (int f = 0; f < kFindingCount; ++f)
      counts[static_cast<size_t>(f)] += c.findings.present[static_cast<size_t>(f)];
  }
  for (int f = 0; f < kFindingCount; ++f) {
    double freq = counts[static_cast<size_t>(f)] / static_cast<double>(n);
    CHECK(freq > 0.285);
    CHECK(freq < 0.315);
  }
}

TEST_CASE("sample_case is reproducible from seed") {
  auto ra = derive_rng(21), rb = derive_rng(21);
  Case a = sample_case(ra, PrevalenceProfile::uniform(0.3));
  Case b = sample_case(rb, PrevalenceProfile::uniform(0.3));
  CHECK(a.findings == b.findings);
  CHECK(a.image == b.image);
  CHECK(a.report == b.report);
}

TEST_CASE("attacker image kinds") {
  // noise: mean near 0.5 over >= 10k pixels
  auto rng = derive_rng(31);
  double sum = 0.0;
  size_t count = 0;
  for (int i = 0; i < 12; ++i) {
    ImageGrid im = sample_attacker_image(AttackerImageKind::Noise, 0.0, rng);
    CHECK(im.in_range());
    for (double p : im.px) sum += p;
    count += im.px.size();
  }
  CHECK(count >= 10000);
  double mean = sum / static_cast<double>(count);
  CHECK(mean > 0.45);
  CHECK(mean < 0.55);

  // mix boundaries share the generator path
  auto r1 = derive_rng(32), r2 = derive_rng(32);
  ImageGrid mix0 = sample_attacker_image(AttackerImageKind::Mix, 0.0, r1);
  ImageGrid nat = sample_attacker_image(AttackerImageKind::Natural, 0.0, r2);
  CHECK(mix0 == nat);
  auto r3 = derive_rng(33), r4 = derive_rng(33);
  ImageGrid mix1 = sample_attacker_image(AttackerImageKind::Mix, 1.0, r3);
  ImageGrid med = sample_attacker_image(AttackerImageKind::Medical, 0.0, r4);
  CHECK(mix1 == med);

  auto r5 = derive_rng(34);
  CHECK_THROWS_AS(sample_attacker_image(AttackerImageKind::Mix, 1.5, r5), ContractError);
  ImageGrid collage = sample_attacker_image(AttackerImageKind::Natural, 0.0, r5);
  CHECK(collage.in_range());
}

TEST_SUITE_END();
