#include "hge/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>

#include "hge/error.hpp"

namespace hge {

WeightedGraph::WeightedGraph(std::vector<std::string> ids, std::span<const WeightedEdge> edges)
    : ids_(std::move(ids)), adjacency_(ids_.size()) {
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], static_cast<NodeIndex>(i)).second) {
      throw InvalidArgument("graph: duplicate node id " + ids_[i]);
    }
  }
  std::map<std::pair<NodeIndex, NodeIndex>, std::uint64_t> merged;
  for (const auto& e : edges) {
    if (e.a >= ids_.size() || e.b >= ids_.size()) throw InvalidArgument("graph: edge endpoint out of range");
    if (e.a == e.b) throw InvalidArgument("graph: self loop on " + ids_[e.a]);
    if (e.weight == 0) continue;
    merged[std::minmax(e.a, e.b)] += e.weight;
  }
  for (const auto& [key, w] : merged) {
    adjacency_[key.first].push_back({key.second, w});
    adjacency_[key.second].push_back({key.first, w});
  }
  for (auto& list : adjacency_) {
    std::sort(list.begin(), list.end(), [](const Neighbor& x, const Neighbor& y) { return x.node < y.node; });
  }
  edge_count_ = merged.size();
}

std::optional<NodeIndex> WeightedGraph::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t WeightedGraph::weight(NodeIndex i, NodeIndex j) const {
  const auto& list = adjacency_[i];
  const auto it = std::lower_bound(list.begin(), list.end(), j,
                                   [](const Neighbor& n, NodeIndex target) { return n.node < target; });
  return (it != list.end() && it->node == j) ? it->weight : 0;
}

std::uint64_t WeightedGraph::weighted_degree(NodeIndex i) const {
  std::uint64_t d = 0;
  for (const auto& n : adjacency_[i]) d += n.weight;
  return d;
}

std::uint64_t WeightedGraph::total_weight() const {
  std::uint64_t total = 0;
  for (NodeIndex i = 0; i < size(); ++i) {
    for (const auto& n : adjacency_[i]) {
      if (n.node > i) total += n.weight;
    }
  }
  return total;
}

std::vector<WeightedEdge> WeightedGraph::edges() const {
  std::vector<WeightedEdge> out;
  out.reserve(edge_count_);
  for (NodeIndex i = 0; i < size(); ++i) {
    for (const auto& n : adjacency_[i]) {
      if (n.node > i) out.push_back({i, n.node, n.weight});
    }
  }
  return out;
}

BipartiteGraph::BipartiteGraph(std::vector<std::string> left_ids, std::vector<std::string> right_ids,
                               std::span<const BipartiteEdge> edges)
    : left_ids_(std::move(left_ids)),
      right_ids_(std::move(right_ids)),
      left_totals_(left_ids_.size(), 0),
      right_degrees_(right_ids_.size(), 0) {
  for (std::size_t i = 0; i < left_ids_.size(); ++i) {
    if (!left_index_.emplace(left_ids_[i], i).second) {
      throw InvalidArgument("bipartite graph: duplicate left id " + left_ids_[i]);
    }
  }
  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> merged;
  for (const auto& e : edges) {
    if (e.left >= left_ids_.size() || e.right >= right_ids_.size()) {
      throw InvalidArgument("bipartite graph: edge endpoint out of range");
    }
    if (e.weight == 0) continue;
    merged[{e.left, e.right}] += e.weight;
  }
  edges_.reserve(merged.size());
  offsets_.assign(left_ids_.size() + 1, 0);
  for (const auto& [key, w] : merged) {
    edges_.push_back({key.first, key.second, w});
    left_totals_[key.first] += w;
    right_degrees_[key.second] += w;
    total_weight_ += w;
    ++offsets_[key.first + 1];
  }
  for (std::size_t i = 0; i < left_ids_.size(); ++i) offsets_[i + 1] += offsets_[i];
}

std::span<const BipartiteEdge> BipartiteGraph::left_edges(std::size_t left) const {
  return std::span<const BipartiteEdge>(edges_).subspan(offsets_[left], offsets_[left + 1] - offsets_[left]);
}

std::optional<std::size_t> BipartiteGraph::find_left(std::string_view id) const {
  const auto it = left_index_.find(std::string(id));
  if (it == left_index_.end()) return std::nullopt;
  return it->second;
}

WeightedGraph BipartiteGraph::to_weighted_graph(std::string_view left_prefix, std::string_view right_prefix) const {
  std::vector<std::string> ids;
  ids.reserve(left_size() + right_size());
  for (const auto& id : left_ids_) ids.push_back(std::string(left_prefix) + id);
  for (const auto& id : right_ids_) ids.push_back(std::string(right_prefix) + id);
  std::vector<WeightedEdge> out;
  out.reserve(edges_.size());
  for (const auto& e : edges_) {
    out.push_back({static_cast<NodeIndex>(e.left), static_cast<NodeIndex>(left_size() + e.right), e.weight});
  }
  return WeightedGraph(std::move(ids), out);
}

void save_edge_list(const std::filesystem::path& path, const WeightedGraph& g) {
  std::vector<std::tuple<std::string_view, std::string_view, std::uint64_t>> lines;
  for (const auto& e : g.edges()) {
    std::string_view a = g.id(e.a), b = g.id(e.b);
    if (b < a) std::swap(a, b);
    lines.emplace_back(a, b, e.weight);
  }
  std::sort(lines.begin(), lines.end());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [a, b, w] : lines) out << a << '\t' << b << '\t' << w << '\n';
  if (!out) throw IoError("write failure on " + path.string());
}

WeightedGraph load_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string source = path.string();
  std::vector<std::tuple<std::string, std::string, std::uint64_t>> raw;
  std::set<std::string> names;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw ParseError(source, line_no, "expected three tab-separated fields");
    }
    std::string a = line.substr(0, t1), b = line.substr(t1 + 1, t2 - t1 - 1);
    std::uint64_t w = 0;
    const char* first = line.data() + t2 + 1;
    const char* last = line.data() + line.size();
    const auto res = std::from_chars(first, last, w);
    if (res.ec != std::errc() || res.ptr != last || first == last) throw ParseError(source, line_no, "invalid weight");
    if (a.empty() || b.empty()) throw ParseError(source, line_no, "empty node id");
    if (a == b) throw ParseError(source, line_no, "self loop");
    names.insert(a);
    names.insert(b);
    raw.emplace_back(std::move(a), std::move(b), w);
  }
  std::vector<std::string> ids(names.begin(), names.end());
  std::unordered_map<std::string, NodeIndex> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = static_cast<NodeIndex>(i);
  std::vector<WeightedEdge> edges;
  edges.reserve(raw.size());
  for (const auto& [a, b, w] : raw) edges.push_back({index[a], index[b], w});
  return WeightedGraph(std::move(ids), edges);
}

}  // namespace hge
