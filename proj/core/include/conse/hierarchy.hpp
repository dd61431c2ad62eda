#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "conse/types.hpp"

namespace conse {

using LabelSet = std::set<LabelId>;

inline constexpr std::size_t kUnboundedHops = std::numeric_limits<std::size_t>::max();

/// Undirected is-a graph over label ids. Parent/child direction is dropped and
/// duplicate edges are collapsed, so DAG inputs are accepted.
class LabelHierarchy {
 public:
  LabelHierarchy() = default;

  /// Throws InvalidEdge on self-loops. `extra_nodes` are added as (possibly
  /// isolated) nodes.
  explicit LabelHierarchy(std::span<const std::pair<LabelId, LabelId>> edges,
                          std::span<const LabelId> extra_nodes = {});

  std::size_t node_count() const noexcept { return ids_.size(); }
  std::size_t edge_count() const noexcept { return targets_.size() / 2; }
  bool contains(LabelId id) const { return index_.contains(id); }
  const std::vector<LabelId>& nodes() const noexcept { return ids_; }
  std::vector<LabelId> neighbors(LabelId id) const;

  /// Shortest undirected path length; nullopt when unreachable.
  std::optional<std::size_t> hop_distance(LabelId a, LabelId b) const;

  /// Hop distances from every source to all nodes reachable within max_hops.
  std::unordered_map<LabelId, std::size_t> distances_from(std::span<const LabelId> sources,
                                                          std::size_t max_hops = kUnboundedHops) const;

  /// Connected components, each sorted; components ordered by size
  /// descending then smallest id.
  std::vector<std::vector<LabelId>> components() const;

  /// Labels outside the largest component.
  std::vector<LabelId> disconnected_labels(std::span<const LabelId> labels) const;

 private:
  std::size_t node_index(LabelId id) const;

  std::vector<LabelId> ids_;  // sorted
  std::unordered_map<LabelId, std::size_t> index_;
  std::vector<std::size_t> offsets_;  // CSR, size ids_+1
  std::vector<std::size_t> targets_;
};

/// Reads "parent child" lines.
LabelHierarchy load_hierarchy(std::istream& in, std::span<const LabelId> extra_nodes = {});
LabelHierarchy load_hierarchy_file(const std::filesystem::path& path, std::span<const LabelId> extra_nodes = {});

/// TEST labels within max_hops of any TRAIN label.
LabelSet hop_candidate_set(const LabelHierarchy& h, const LabelSet& train_labels, const LabelSet& test_labels,
                           std::size_t max_hops);

/// Labels of `universe` around true_label, grown one hop radius at a time
/// until at least k are collected. Every label at the boundary radius is
/// included, so the result may exceed k. Universe labels unreachable from
/// true_label form a final tier.
LabelSet relevance_set(const LabelHierarchy& h, LabelId true_label, std::size_t k, const LabelSet& universe);

}  // namespace conse
