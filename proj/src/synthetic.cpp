#include "kgx/synthetic.hpp"

#include "kgx/rng.hpp"

namespace kgx {

KnowledgeGraph make_synthetic_kg(const SyntheticConfig& cfg) {
  if (cfg.n_groups < 2 || cfg.members_per_group < 3 || cfg.n_orgs < 1 || cfg.n_skills < 2) {
    throw ContractError("synthetic KG: scale parameters too small");
  }
  Rng rng(cfg.rng_seed);

  auto person = [](std::size_t i) { return "p" + std::to_string(i); };
  auto group = [](std::size_t g) { return "team" + std::to_string(g); };
  auto org = [](std::size_t o) { return "org" + std::to_string(o); };
  auto skill = [](std::size_t s) { return "skill" + std::to_string(s); };

  const std::size_t n_people = cfg.n_groups * cfg.members_per_group;
  auto group_of = [&](std::size_t p) { return p / cfg.members_per_group; };
  auto org_of_group = [&](std::size_t g) { return g % cfg.n_orgs; };
  auto lead_of_group = [&](std::size_t g) { return g * cfg.members_per_group; };

  std::vector<LabelTriple> triples;
  triples.reserve(10 * n_people);

  for (std::size_t g = 0; g < cfg.n_groups; ++g) {
    triples.push_back({group(g), "part_of", org(org_of_group(g))});
    triples.push_back({person(lead_of_group(g)), "leads", group(g)});
    // signature skills per group
    triples.push_back({skill((2 * g) % cfg.n_skills), "taught_in", group(g)});
    triples.push_back({skill((2 * g + 1) % cfg.n_skills), "taught_in", group(g)});
  }

  for (std::size_t p = 0; p < n_people; ++p) {
    const std::size_t g = group_of(p);
    triples.push_back({person(p), "member_of", group(g)});
    if (p != lead_of_group(g)) {
      triples.push_back({person(p), "reports_to", person(lead_of_group(g))});
    } else {
      // hub edges stay rare: only leads link to orgs and skills directly
      triples.push_back({person(p), "based_in", org(org_of_group(g))});
      triples.push_back({person(p), "has_skill", skill((2 * g) % cfg.n_skills)});
      triples.push_back({person(p), "has_skill", skill((2 * g + 1) % cfg.n_skills)});
    }
    if (p % 5 == 1) triples.push_back({person(p), "has_skill", skill((2 * g) % cfg.n_skills)});
    // colleague ring inside the group, symmetric for every other member
    const std::size_t next =
        g * cfg.members_per_group + (p % cfg.members_per_group + 1) % cfg.members_per_group;
    triples.push_back({person(p), "colleague", person(next)});
    if (p % 2 == 0) triples.push_back({person(next), "colleague", person(p)});
    // deterministic successor ring distinguishes members within a group
    triples.push_back({person(p), "succeeded_by", person(next)});
  }

  // cross-group mentorship within the same org
  for (std::size_t g = 0; g < cfg.n_groups; ++g) {
    for (int k = 0; k < 2; ++k) {
      std::size_t other = (g + 1 + rng.index(cfg.n_groups - 1)) % cfg.n_groups;
      if (org_of_group(other) != org_of_group(g)) other = (g + cfg.n_orgs) % cfg.n_groups;
      const std::size_t mentee =
          other * cfg.members_per_group + 1 + rng.index(cfg.members_per_group - 1);
      triples.push_back({person(lead_of_group(g)), "mentors", person(mentee)});
    }
  }

  // random friendships inside an org
  for (std::size_t i = 0; i < cfg.extra_friend_pairs; ++i) {
    const std::size_t a = rng.index(n_people);
    const std::size_t ga = group_of(a);
    std::size_t gb = ga;
    for (int tries = 0; tries < 8; ++tries) {
      const std::size_t cand = rng.index(cfg.n_groups);
      if (org_of_group(cand) == org_of_group(ga)) {
        gb = cand;
        break;
      }
    }
    const std::size_t b = gb * cfg.members_per_group + rng.index(cfg.members_per_group);
    if (a == b) continue;
    triples.push_back({person(a), "friend", person(b)});
  }

  // irregularities: secondary memberships and mislabeled edges that break
  // the clean functional patterns for a slice of the population
  const auto n_irregular =
      static_cast<std::size_t>(cfg.irregular_fraction * static_cast<double>(n_people));
  for (std::size_t i = 0; i < n_irregular; ++i) {
    const std::size_t p = rng.index(n_people);
    const std::size_t other = rng.index(cfg.n_groups);
    triples.push_back({person(p), "member_of", group(other)});
    if (rng.coin()) {
      triples.push_back({person(p), "based_in", org(rng.index(cfg.n_orgs))});
    } else {
      triples.push_back({person(p), "reports_to", person(rng.index(n_people))});
    }
  }

  return KnowledgeGraph::build(triples, {});
}

}  // namespace kgx
