#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace adalab {

// Five anatomical regions, eight boolean findings. Region order is the fixed
// sentence order in every report.
constexpr int kRegionCount = 5;
constexpr int kFindingCount = 8;

enum Region : int {
  kAirway = 0,
  kBreathing = 1,
  kCardiac = 2,
  kDiaphragm = 3,
  kOther = 4,
};

const char* region_name(int region);

struct FindingDef {
  const char* name;
  int region;
};

const std::array<FindingDef, kFindingCount>& findings();
// Finding ids belonging to a region, ascending.
const std::vector<int>& region_findings(int region);
int finding_region(int finding);
int finding_index(const std::string& name);  // -1 if unknown

struct FindingVector {
  std::array<uint8_t, kFindingCount> present{};

  static FindingVector from_bits(unsigned bits);
  unsigned bits() const;
  bool operator==(const FindingVector&) const = default;
};

// (region, finding, present)
using GraphEntity = std::tuple<int, int, bool>;
// located-in edge: (finding, present, region); the finding endpoint is the
// full entity, so a relation can only exist alongside its entity.
using GraphRelation = std::tuple<int, bool, int>;

struct FindingGraph {
  std::set<GraphEntity> entities;
  std::set<GraphRelation> relations;

  bool operator==(const FindingGraph&) const = default;
  bool empty() const { return entities.empty() && relations.empty(); }
};

// Full graph of a finding vector: one entity and one located-in edge per
// finding, absent findings included.
FindingGraph graph_of(const FindingVector& v);

// Stable digest of the region/finding tables, recorded in dataset manifests.
std::string ontology_hash();

}  // namespace adalab
