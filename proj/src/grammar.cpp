#include "adalab/grammar.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "adalab/common.hpp"

namespace adalab {

namespace {

TemplatePattern pat(std::vector<std::vector<std::string>> slots) { return {std::move(slots)}; }

std::vector<RegionStateTemplates> build_templates() {
  std::vector<RegionStateTemplates> t;

  // airway: {deviation}
  t.push_back({kAirway, 0u,
               {pat({{"trachea"}, {"is", "appears"}, {"midline"}}),
                pat({{"airway"}, {"is"}, {"patent"}}),
                pat({{"trachea"}, {"remains"}, {"central"}})}});
  t.push_back({kAirway, 1u,
               {pat({{"trachea"}, {"is", "appears"}, {"deviated"}}),
                pat({{"airway"}, {"is"}, {"displaced", "shifted"}}),
                pat({{"trachea"}, {"remains"}, {"deviated"}})}});

  // breathing: {opacity, effusion}
  t.push_back({kBreathing, 0u,
               {pat({{"lungs"}, {"are", "remain"}, {"clear"}}),
                pat({{"lung"}, {"fields"}, {"clear"}}),
                pat({{"lungs"}, {"appear"}, {"unremarkable"}})}});
  t.push_back({kBreathing, 1u,
               {pat({{"focal", "patchy"}, {"opacity"}, {"seen", "noted"}}),
                pat({{"hazy"}, {"opacity"}, {"present"}})}});
  t.push_back({kBreathing, 2u,
               {pat({{"small", "layering"}, {"effusion"}, {"seen", "noted"}}),
                pat({{"pleural"}, {"effusion"}, {"present"}})}});
  t.push_back({kBreathing, 3u,
               {pat({{"opacity"}, {"with", "and"}, {"effusion"}}),
                pat({{"opacity"}, {"plus"}, {"effusion"}})}});

  // cardiac: {cardiomegaly}
  t.push_back({kCardiac, 0u,
               {pat({{"heart"}, {"size"}, {"normal", "ordinary"}}),
                pat({{"cardiac"}, {"contour"}, {"normal"}}),
                pat({{"heart"}, {"appears"}, {"unremarkable"}})}});
  t.push_back({kCardiac, 1u,
               {pat({{"heart"}, {"is", "appears"}, {"enlarged"}}),
                pat({{"cardiac"}, {"silhouette"}, {"enlarged"}}),
                pat({{"heart"}, {"size"}, {"increased"}})}});

  // diaphragm: {elevation, blunting}
  t.push_back({kDiaphragm, 0u,
               {pat({{"diaphragm"}, {"is", "appears"}, {"normal"}}),
                pat({{"diaphragm"}, {"contour"}, {"normal"}}),
                pat({{"hemidiaphragms"}, {"are"}, {"unremarkable"}})}});
  t.push_back({kDiaphragm, 1u,
               {pat({{"hemidiaphragm"}, {"is", "appears"}, {"elevated"}}),
                pat({{"diaphragm"}, {"is"}, {"elevated", "raised"}})}});
  t.push_back({kDiaphragm, 2u,
               {pat({{"costophrenic"}, {"angle"}, {"blunted"}}),
                pat({{"angle"}, {"blunting"}, {"seen", "noted"}})}});
  t.push_back({kDiaphragm, 3u,
               {pat({{"elevation"}, {"with", "and"}, {"blunting"}}),
                pat({{"elevation"}, {"plus"}, {"blunting"}})}});

  // other: {device, fracture}
  t.push_back({kOther, 0u,
               {pat({{"no"}, {"support"}, {"devices"}}),
                pat({{"no"}, {"hardware"}, {"seen", "noted"}}),
                pat({{"soft"}, {"tissues"}, {"unremarkable"}})}});
  t.push_back({kOther, 1u,
               {pat({{"pacemaker"}, {"device"}, {"seen", "noted"}}),
                pat({{"support"}, {"device"}, {"present"}})}});
  t.push_back({kOther, 2u,
               {pat({{"rib"}, {"fracture"}, {"seen", "noted"}}),
                pat({{"old"}, {"fracture"}, {"present"}})}});
  t.push_back({kOther, 3u,
               {pat({{"device"}, {"with", "and"}, {"fracture"}}),
                pat({{"device"}, {"plus"}, {"fracture"}})}});
  return t;
}

// Paraphrase words used by the oracle bank but never emitted by the grammar.
const std::vector<std::string>& oracle_words() {
  static const std::vector<std::string> words = {
      "likely",     "probable", "borderline", "marked",   "dense",  "new",
      "developing", "bibasilar", "obscured",  "prominent", "bulging",
  };
  return words;
}

// Distractor vocabulary: report-adjacent words the victim could in principle
// emit; also the sampling pool for the off-domain audit corpus.
const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "the",        "a",           "of",          "in",        "on",         "for",
      "to",         "at",          "by",          "as",        "image",      "study",
      "patient",    "comparison",  "prior",       "stable",    "acute",      "process",
      "impression", "technique",   "views",       "frontal",   "lateral",    "chest",
      "bony",       "thorax",      "visualized",  "grossly",   "intact",     "aorta",
      "mediastinal", "contours",   "within",      "limits",    "without",    "evidence",
      "consolidation", "pneumothorax", "vasculature", "pulmonary", "osseous", "structures",
      "degenerative", "changes",   "mild",        "moderate",  "severe",     "interval",
      "change",     "markings",    "bilateral",   "right",     "left",       "upper",
      "lower",      "lobe",        "zone",        "silhouettes", "borders",  "margins",
      "trace",      "tiny",        "large",       "volumes",   "low",        "high",
      "apices",     "bases",       "costal",      "margin",    "spine",      "clavicles",
      "shoulders",  "ribs",        "bones",       "tubes",     "lines",      "valves",
      "wires",      "catheter",    "tip",         "position",  "midline",    "overlying",
      "artifact",   "rotation",    "penetration", "inspiration", "expiration", "cardiomegaly",
      "effusions",  "opacities",   "infiltrate",  "atelectasis", "scarring", "granuloma",
      "nodule",     "mass",        "lesion",      "calcification", "emphysema", "edema",
      "congestion", "cephalization", "air",       "space",     "disease",    "findings",
      "finding",    "none",        "identified",  "definite",  "focus",      "region",
      "regions",    "area",        "areas",       "overall",   "otherwise",  "again",
      "noting",     "consistent",  "compatible",  "suggesting", "possibly",  "versus",
      "correlate",  "clinically",  "recommend",   "followup",  "attention",  "compared",
  };
  return words;
}

}  // namespace

const std::vector<RegionStateTemplates>& grammar_templates() {
  static const std::vector<RegionStateTemplates> t = build_templates();
  return t;
}

const std::vector<std::string>& lexicon() {
  static const std::vector<std::string> lex = [] {
    std::vector<std::string> out = {kPadTok, kBosTok, kEosTok, kUnkTok, kPeriodTok};
    auto add = [&out](const std::string& w) {
      if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
    };
    for (const auto& rst : grammar_templates())
      for (const auto& p : rst.patterns)
        for (const auto& slot : p.slots)
          for (const auto& w : slot) add(w);
    for (const auto& w : oracle_words()) add(w);
    for (const auto& w : filler_words()) add(w);
    return out;
  }();
  return lex;
}

int lexicon_id(const std::string& token) {
  static const std::unordered_map<std::string, int> index = [] {
    std::unordered_map<std::string, int> m;
    for (size_t i = 0; i < lexicon().size(); ++i) m[lexicon()[i]] = static_cast<int>(i);
    return m;
  }();
  auto it = index.find(token);
  return it == index.end() ? -1 : it->second;
}

unsigned region_state(const FindingVector& v, int region) {
  unsigned state = 0;
  const auto& fs = region_findings(region);
  for (size_t i = 0; i < fs.size(); ++i)
    if (v.present[static_cast<size_t>(fs[i])]) state |= 1u << i;
  return state;
}

namespace {

const RegionStateTemplates& templates_for(int region, unsigned state) {
  for (const auto& rst : grammar_templates())
    if (rst.region == region && rst.state_mask == state) return rst;
  throw ContractError("no template for region state");
}

}  // namespace

Report realize_report_for_regions(const FindingVector& v, std::mt19937_64& rng,
                                  const std::vector<int>& regions) {
  Report out;
  for (int region : regions) {
    const auto& rst = templates_for(region, region_state(v, region));
    const auto& p = rst.patterns[std::uniform_int_distribution<size_t>(
        0, rst.patterns.size() - 1)(rng)];
    for (const auto& slot : p.slots)
      out.push_back(slot[std::uniform_int_distribution<size_t>(0, slot.size() - 1)(rng)]);
    out.push_back(kPeriodTok);
  }
  out.push_back(kEosTok);
  return out;
}

Report realize_report(const FindingVector& v, std::mt19937_64& rng) {
  static const std::vector<int> all = {kAirway, kBreathing, kCardiac, kDiaphragm, kOther};
  return realize_report_for_regions(v, rng, all);
}

ParsedReport parse_report_detailed(const Report& r) {
  ParsedReport out;
  std::vector<std::string> body;
  auto try_sentence = [&out](const std::vector<std::string>& body) {
    const TemplatePattern* best = nullptr;
    const RegionStateTemplates* best_rst = nullptr;
    for (const auto& rst : grammar_templates()) {
      for (const auto& p : rst.patterns) {
        if (p.slots.size() != body.size()) continue;
        bool ok = true;
        for (size_t i = 0; i < body.size() && ok; ++i)
          ok = std::find(p.slots[i].begin(), p.slots[i].end(), body[i]) != p.slots[i].end();
        if (!ok) continue;
        // longest match wins; ties resolve to the first pattern in table order
        if (!best || p.slots.size() > best->slots.size()) {
          best = &p;
          best_rst = &rst;
        }
      }
    }
    if (!best_rst) return;
    int region = best_rst->region;
    if (out.region_sentence[static_cast<size_t>(region)]) return;  // first match wins
    std::vector<std::string> sentence = body;
    sentence.push_back(kPeriodTok);
    out.region_sentence[static_cast<size_t>(region)] = std::move(sentence);
    const auto& fs = region_findings(region);
    for (size_t i = 0; i < fs.size(); ++i) {
      bool present = (best_rst->state_mask >> i) & 1u;
      out.graph.entities.insert({region, fs[i], present});
      out.graph.relations.insert({fs[i], present, region});
    }
  };
  for (const auto& tok : r) {
    if (tok == kEosTok) break;
    if (tok == kPadTok || tok == kBosTok) continue;
    if (tok == kPeriodTok) {
      if (!body.empty()) try_sentence(body);
      body.clear();
      continue;
    }
    body.push_back(tok);
  }
  return out;
}

FindingGraph parse_report(const Report& r) { return parse_report_detailed(r).graph; }

std::vector<std::string> strip_specials(const Report& r) {
  std::vector<std::string> out;
  for (const auto& t : r)
    if (t != kPadTok && t != kBosTok && t != kEosTok) out.push_back(t);
  return out;
}

size_t max_grammar_report_length() {
  size_t len = 0;
  for (int region = 0; region < kRegionCount; ++region) {
    size_t longest = 0;
    for (const auto& rst : grammar_templates())
      if (rst.region == region)
        for (const auto& p : rst.patterns) longest = std::max(longest, p.slots.size() + 1);
    len += longest;
  }
  return len + 1;  // EOS
}

}  // namespace adalab
