#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "adalab/ontology.hpp"

namespace adalab {

// Reports are token sequences over the closed lexicon. A complete report ends
// with the EOS token; specials never appear mid-report.
using Report = std::vector<std::string>;

inline constexpr const char* kPadTok = "<pad>";
inline constexpr const char* kBosTok = "<s>";
inline constexpr const char* kEosTok = "</s>";
inline constexpr const char* kPeriodTok = ".";

inline constexpr const char* kUnkTok = "<unk>";

// One sentence body: three slots, each a set of interchangeable words. The
// trailing period is implicit.
struct TemplatePattern {
  std::vector<std::vector<std::string>> slots;
};

struct RegionStateTemplates {
  int region;
  unsigned state_mask;  // bit i = status of region_findings(region)[i]
  std::vector<TemplatePattern> patterns;
};

const std::vector<RegionStateTemplates>& grammar_templates();

// Closed vocabulary: specials, period, grammar words, oracle paraphrase
// words, filler words. Order is fixed.
const std::vector<std::string>& lexicon();
int lexicon_id(const std::string& token);  // -1 if absent

// Status bits of a region's findings within `v`.
unsigned region_state(const FindingVector& v, int region);

// One sentence per region in fixed region order, EOS-terminated. Template and
// synonym choices are drawn from `rng`.
Report realize_report(const FindingVector& v, std::mt19937_64& rng);
// Restriction to a region subset; an empty list yields an EOS-only report.
Report realize_report_for_regions(const FindingVector& v, std::mt19937_64& rng,
                                  const std::vector<int>& regions);

struct ParsedReport {
  FindingGraph graph;
  // Matched sentence per region (tokens incl. trailing period), when any.
  std::array<std::optional<std::vector<std::string>>, kRegionCount> region_sentence;
};

// Longest-match template recognition per sentence; unrecognized sentences
// contribute nothing. The first recognized sentence for a region wins.
ParsedReport parse_report_detailed(const Report& r);
FindingGraph parse_report(const Report& r);

// Tokens with PAD/BOS/EOS removed (UNK kept: it is a real mismatch).
std::vector<std::string> strip_specials(const Report& r);

// Longest realizable report length in tokens including EOS.
size_t max_grammar_report_length();

}  // namespace adalab
