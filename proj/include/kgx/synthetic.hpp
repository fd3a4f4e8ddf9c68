#pragma once

#include "kgx/graph.hpp"

namespace kgx {

struct SyntheticConfig {
  std::size_t n_groups = 14;
  std::size_t members_per_group = 10;
  std::size_t n_orgs = 3;
  std::size_t n_skills = 10;
  std::size_t extra_friend_pairs = 160;
  double irregular_fraction = 0.15;  // members with pattern-breaking edges
  std::uint64_t rng_seed = 1;
};

// A compositional organization KG built from deterministic relational
// patterns: people belong to groups, groups to orgs, `based_in` composes
// `member_of` with `part_of`, every group has a lead everyone reports to,
// skills follow group signatures, and colleague/successor rings plus friend
// edges add symmetric person-to-person structure. A configurable slice of
// the population carries pattern-breaking edges. Around a thousand triples
// at the default scale, so an unseen member's relations are predictable
// from its support neighborhood but not by any single formula.
KnowledgeGraph make_synthetic_kg(const SyntheticConfig& cfg);

}  // namespace kgx
