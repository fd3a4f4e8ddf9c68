#include "kgx/encoder.hpp"

namespace kgx {

TaskEmbeddings encode(Tape& tape, std::span<const Triple> support, Tape::NodeId entity_feats,
                      Tape::NodeId relation_feats, std::span<const GnnLayer> layers) {
  if (layers.empty()) throw ContractError("encode: needs at least one layer");
  const std::size_t n_entities = tape.value(entity_feats).rows();

  std::vector<std::uint32_t> head_ids, rel_ids, tail_ids;
  head_ids.reserve(support.size());
  rel_ids.reserve(support.size());
  tail_ids.reserve(support.size());
  std::vector<std::uint32_t> incidences(n_entities, 0);
  for (const Triple& t : support) {
    head_ids.push_back(t.head);
    rel_ids.push_back(t.relation);
    tail_ids.push_back(t.tail);
    ++incidences[t.head];
    ++incidences[t.tail];
  }
  for (std::size_t e = 0; e < n_entities; ++e) {
    if (incidences[e] == 0) {
      throw ContractError("encode: entity " + std::to_string(e) +
                          " has no support incidence (normalizer would be zero)");
    }
  }

  // groups for scatter: out-messages land on heads, in-messages on tails
  std::vector<std::uint32_t> message_groups;
  message_groups.reserve(2 * support.size());
  message_groups.insert(message_groups.end(), head_ids.begin(), head_ids.end());
  message_groups.insert(message_groups.end(), tail_ids.begin(), tail_ids.end());

  Tape::NodeId ent_state = entity_feats;
  Tape::NodeId rel_state = relation_feats;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const GnnLayer& layer = layers[l];
    const Tape::NodeId rel_rows = tape.gather(rel_state, rel_ids);
    const Tape::NodeId head_rows = tape.gather(ent_state, head_ids);
    const Tape::NodeId tail_rows = tape.gather(ent_state, tail_ids);

    const Tape::NodeId out_msgs = tape.matmul(tape.concat_cols(rel_rows, tail_rows), layer.w_out);
    const Tape::NodeId in_msgs = tape.matmul(tape.concat_cols(rel_rows, head_rows), layer.w_in);
    const Tape::NodeId mean_msg = tape.scatter_mean(tape.concat_rows(out_msgs, in_msgs),
                                                    message_groups, n_entities);

    Tape::NodeId ent_next = tape.add(mean_msg, tape.matmul(ent_state, layer.w_self));
    Tape::NodeId rel_next = tape.matmul(rel_state, layer.w_rel);
    const bool last = (l + 1 == layers.size());
    if (!last) {
      ent_next = tape.relu(ent_next);
      rel_next = tape.relu(rel_next);
    }
    ent_state = ent_next;
    rel_state = rel_next;
  }
  return {ent_state, rel_state};
}

}  // namespace kgx
