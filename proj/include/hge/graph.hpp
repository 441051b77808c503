#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hge {

using NodeIndex = std::uint32_t;

struct Neighbor {
  NodeIndex node;
  std::uint64_t weight;
};

struct WeightedEdge {
  NodeIndex a;
  NodeIndex b;
  std::uint64_t weight;
};

// Undirected graph with positive integer edge weights and no self loops.
// Adjacency lists are sorted by neighbor index.
class WeightedGraph {
 public:
  WeightedGraph() = default;
  // Parallel edges are summed; zero-weight edges are dropped.
  WeightedGraph(std::vector<std::string> ids, std::span<const WeightedEdge> edges);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(NodeIndex i) const { return ids_[i]; }
  std::optional<NodeIndex> find(std::string_view id) const;

  std::span<const Neighbor> neighbors(NodeIndex i) const { return adjacency_[i]; }
  std::uint64_t weight(NodeIndex i, NodeIndex j) const;
  bool has_edge(NodeIndex i, NodeIndex j) const { return weight(i, j) != 0; }
  std::uint64_t weighted_degree(NodeIndex i) const;

  std::size_t edge_count() const { return edge_count_; }
  std::uint64_t total_weight() const;

  // Each undirected edge once, with a < b.
  std::vector<WeightedEdge> edges() const;

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, NodeIndex> index_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::size_t edge_count_ = 0;
};

struct BipartiteEdge {
  std::size_t left;
  std::size_t right;
  std::uint64_t weight;
};

// Weighted simple bipartite graph between a left set (patients) and a right
// set (services, doctors or hybrid nodes). Parallel input edges are merged;
// edges are stored sorted by (left, right).
class BipartiteGraph {
 public:
  BipartiteGraph() = default;
  BipartiteGraph(std::vector<std::string> left_ids, std::vector<std::string> right_ids,
                 std::span<const BipartiteEdge> edges);

  const std::vector<std::string>& left_ids() const { return left_ids_; }
  const std::vector<std::string>& right_ids() const { return right_ids_; }
  std::size_t left_size() const { return left_ids_.size(); }
  std::size_t right_size() const { return right_ids_.size(); }

  std::span<const BipartiteEdge> edges() const { return edges_; }
  // Edges of one left vertex, sorted by right index.
  std::span<const BipartiteEdge> left_edges(std::size_t left) const;
  std::uint64_t left_total(std::size_t left) const { return left_totals_[left]; }
  std::uint64_t right_degree(std::size_t right) const { return right_degrees_[right]; }
  std::uint64_t total_weight() const { return total_weight_; }
  std::optional<std::size_t> find_left(std::string_view id) const;

  // Homogeneous view: nodes are `left_prefix + id` then `right_prefix + id`.
  WeightedGraph to_weighted_graph(std::string_view left_prefix, std::string_view right_prefix) const;

 private:
  std::vector<std::string> left_ids_;
  std::vector<std::string> right_ids_;
  std::vector<BipartiteEdge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint64_t> left_totals_;
  std::vector<std::uint64_t> right_degrees_;
  std::uint64_t total_weight_ = 0;
  std::unordered_map<std::string, std::size_t> left_index_;
};

// Edge-list text: `id_a<TAB>id_b<TAB>weight`, one undirected edge per line,
// id_a < id_b lexicographically, lines sorted. Isolated vertices are not
// representable.
void save_edge_list(const std::filesystem::path& path, const WeightedGraph& g);
// Node ids of the result are sorted lexicographically.
WeightedGraph load_edge_list(const std::filesystem::path& path);

}  // namespace hge
