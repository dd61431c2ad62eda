#include "conse/hierarchy.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <istream>
#include <string>

#include "conse/error.hpp"
#include "text_util.hpp"

namespace conse {

LabelHierarchy::LabelHierarchy(std::span<const std::pair<LabelId, LabelId>> edges,
                               std::span<const LabelId> extra_nodes) {
  for (const auto& [a, b] : edges) {
    if (a == b) throw Error(ErrorCode::InvalidEdge, "self-loop on " + std::to_string(a));
    ids_.push_back(a);
    ids_.push_back(b);
  }
  ids_.insert(ids_.end(), extra_nodes.begin(), extra_nodes.end());
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], i);

  std::vector<std::pair<std::size_t, std::size_t>> arcs;
  arcs.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) {
    const std::size_t ia = index_.at(a);
    const std::size_t ib = index_.at(b);
    arcs.emplace_back(ia, ib);
    arcs.emplace_back(ib, ia);
  }
  std::sort(arcs.begin(), arcs.end());
  arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());

  offsets_.assign(ids_.size() + 1, 0);
  for (const auto& arc : arcs) ++offsets_[arc.first + 1];
  for (std::size_t i = 0; i < ids_.size(); ++i) offsets_[i + 1] += offsets_[i];
  targets_.reserve(arcs.size());
  for (const auto& arc : arcs) targets_.push_back(arc.second);
}

std::size_t LabelHierarchy::node_index(LabelId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::UnknownNode, "label " + std::to_string(id) + " not in hierarchy");
  return it->second;
}

std::vector<LabelId> LabelHierarchy::neighbors(LabelId id) const {
  const std::size_t i = node_index(id);
  std::vector<LabelId> out;
  for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) out.push_back(ids_[targets_[e]]);
  return out;
}

std::optional<std::size_t> LabelHierarchy::hop_distance(LabelId a, LabelId b) const {
  const std::size_t src = node_index(a);
  const std::size_t dst = node_index(b);
  if (src == dst) return 0;
  constexpr std::size_t unseen = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(ids_.size(), unseen);
  std::deque<std::size_t> queue{src};
  dist[src] = 0;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t e = offsets_[u]; e < offsets_[u + 1]; ++e) {
      const std::size_t v = targets_[e];
      if (dist[v] != unseen) continue;
      dist[v] = dist[u] + 1;
      if (v == dst) return dist[v];
      queue.push_back(v);
    }
  }
  return std::nullopt;
}

std::unordered_map<LabelId, std::size_t> LabelHierarchy::distances_from(std::span<const LabelId> sources,
                                                                        std::size_t max_hops) const {
  constexpr std::size_t unseen = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(ids_.size(), unseen);
  std::deque<std::size_t> queue;
  for (LabelId s : sources) {
    const std::size_t i = node_index(s);
    if (dist[i] == unseen) {
      dist[i] = 0;
      queue.push_back(i);
    }
  }
  std::unordered_map<LabelId, std::size_t> out;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    out.emplace(ids_[u], dist[u]);
    if (dist[u] >= max_hops) continue;
    for (std::size_t e = offsets_[u]; e < offsets_[u + 1]; ++e) {
      const std::size_t v = targets_[e];
      if (dist[v] != unseen) continue;
      dist[v] = dist[u] + 1;
      queue.push_back(v);
    }
  }
  return out;
}

std::vector<std::vector<LabelId>> LabelHierarchy::components() const {
  std::vector<std::vector<LabelId>> out;
  std::vector<bool> seen(ids_.size(), false);
  for (std::size_t start = 0; start < ids_.size(); ++start) {
    if (seen[start]) continue;
    std::vector<LabelId> comp;
    std::vector<std::size_t> stack{start};
    seen[start] = true;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      comp.push_back(ids_[u]);
      for (std::size_t e = offsets_[u]; e < offsets_[u + 1]; ++e) {
        if (!seen[targets_[e]]) {
          seen[targets_[e]] = true;
          stack.push_back(targets_[e]);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  return out;
}

std::vector<LabelId> LabelHierarchy::disconnected_labels(std::span<const LabelId> labels) const {
  auto comps = components();
  std::vector<LabelId> out;
  for (LabelId id : labels) {
    if (!contains(id) || comps.empty() || !std::binary_search(comps[0].begin(), comps[0].end(), id)) {
      out.push_back(id);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

LabelHierarchy load_hierarchy(std::istream& in, std::span<const LabelId> extra_nodes) {
  std::vector<std::pair<LabelId, LabelId>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::strip_cr(line);
    if (detail::is_blank(view)) continue;
    auto fields = detail::split(view, ' ');
    std::optional<std::int64_t> parent;
    std::optional<std::int64_t> child;
    if (fields.size() == 2) {
      parent = detail::parse_int(fields[0]);
      child = detail::parse_int(fields[1]);
    }
    if (!parent || !child) {
      throw Error(ErrorCode::Parse, "hierarchy line " + std::to_string(line_no) + ": expected 'parent child'");
    }
    edges.emplace_back(*parent, *child);
  }
  return LabelHierarchy(edges, extra_nodes);
}

LabelHierarchy load_hierarchy_file(const std::filesystem::path& path, std::span<const LabelId> extra_nodes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return load_hierarchy(in, extra_nodes);
}

LabelSet hop_candidate_set(const LabelHierarchy& h, const LabelSet& train_labels, const LabelSet& test_labels,
                           std::size_t max_hops) {
  if (max_hops < 1) throw Error(ErrorCode::InvalidArgument, "max_hops must be at least 1");
  if (train_labels.empty()) throw Error(ErrorCode::EmptyTrainSet, "no training labels");
  for (LabelId id : test_labels) {
    if (!h.contains(id)) throw Error(ErrorCode::UnknownNode, "label " + std::to_string(id) + " not in hierarchy");
  }
  const std::vector<LabelId> sources(train_labels.begin(), train_labels.end());
  const auto dist = h.distances_from(sources, max_hops);
  LabelSet out;
  for (LabelId id : test_labels) {
    if (dist.contains(id)) out.insert(id);
  }
  return out;
}

LabelSet relevance_set(const LabelHierarchy& h, LabelId true_label, std::size_t k, const LabelSet& universe) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  if (!universe.contains(true_label)) {
    throw Error(ErrorCode::InvalidArgument, "true label " + std::to_string(true_label) + " not in universe");
  }
  if (universe.size() < k) {
    throw Error(ErrorCode::UniverseTooSmall,
                "universe has " + std::to_string(universe.size()) + " labels, k = " + std::to_string(k));
  }
  const LabelId source[] = {true_label};
  const auto dist = h.distances_from(source);

  std::map<std::size_t, std::vector<LabelId>> by_radius;
  std::vector<LabelId> unreachable;
  for (LabelId id : universe) {
    if (auto it = dist.find(id); it != dist.end()) {
      by_radius[it->second].push_back(id);
    } else {
      unreachable.push_back(id);
    }
  }
  LabelSet out;
  for (const auto& [radius, ids] : by_radius) {
    out.insert(ids.begin(), ids.end());
    if (out.size() >= k) return out;
  }
  out.insert(unreachable.begin(), unreachable.end());
  return out;
}

}  // namespace conse
