#include "adalab/ontology.hpp"

#include "adalab/common.hpp"

namespace adalab {

const char* region_name(int region) {
  static const char* names[kRegionCount] = {"airway", "breathing", "cardiac", "diaphragm",
                                            "other"};
  if (region < 0 || region >= kRegionCount) throw IndexError("bad region index");
  return names[region];
}

const std::array<FindingDef, kFindingCount>& findings() {
  static const std::array<FindingDef, kFindingCount> defs = {{
      {"deviation", kAirway},
      {"opacity", kBreathing},
      {"effusion", kBreathing},
      {"cardiomegaly", kCardiac},
      {"elevation", kDiaphragm},
      {"blunting", kDiaphragm},
      {"device", kOther},
      {"fracture", kOther},
  }};
  return defs;
}

const std::vector<int>& region_findings(int region) {
  static const std::vector<std::vector<int>> by_region = [] {
    std::vector<std::vector<int>> v(kRegionCount);
    for (int f = 0; f < kFindingCount; ++f) v[findings()[f].region].push_back(f);
    return v;
  }();
  if (region < 0 || region >= kRegionCount) throw IndexError("bad region index");
  return by_region[static_cast<size_t>(region)];
}

int finding_region(int finding) {
  if (finding < 0 || finding >= kFindingCount) throw IndexError("bad finding index");
  return findings()[static_cast<size_t>(finding)].region;
}

int finding_index(const std::string& name) {
  for (int f = 0; f < kFindingCount; ++f)
    if (name == findings()[static_cast<size_t>(f)].name) return f;
  return -1;
}

FindingVector FindingVector::from_bits(unsigned bits) {
  FindingVector v;
  for (int f = 0; f < kFindingCount; ++f) v.present[static_cast<size_t>(f)] = (bits >> f) & 1u;
  return v;
}

unsigned FindingVector::bits() const {
  unsigned b = 0;
  for (int f = 0; f < kFindingCount; ++f)
    if (present[static_cast<size_t>(f)]) b |= 1u << f;
  return b;
}

FindingGraph graph_of(const FindingVector& v) {
  FindingGraph g;
  for (int f = 0; f < kFindingCount; ++f) {
    bool p = v.present[static_cast<size_t>(f)] != 0;
    int r = finding_region(f);
    g.entities.insert({r, f, p});
    g.relations.insert({f, p, r});
  }
  return g;
}

std::string ontology_hash() {
  uint64_t h = 14695981039346656037ULL;
  for (int r = 0; r < kRegionCount; ++r) {
    const char* n = region_name(r);
    h = fnv1a64(n, std::string(n).size(), h);
  }
  for (const auto& f : findings()) {
    h = fnv1a64(f.name, std::string(f.name).size(), h);
    h = fnv1a64(&f.region, sizeof(f.region), h);
  }
  return hex64(h);
}

}  // namespace adalab
