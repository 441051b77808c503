#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "hge/events.hpp"
#include "hge/graph.hpp"

namespace hge {

// Service co-occurrence graph. Node index i is row i of the adjacency
// matrix; ids are sorted lexicographically.
using ServiceGraph = WeightedGraph;

// Partitions each patient's journey into half-open windows
// [d0 + kT, d0 + (k+1)T) anchored at the patient's first event day d0. Each
// unordered pair of distinct services present in a window adds 1 to the pair
// weight. Every service seen in any event becomes a vertex. `threads` > 1
// splits patients across worker threads; the result is identical.
ServiceGraph build_cooccurrence(const Journeys& journeys, std::int64_t window_days, unsigned threads = 1);

// Weighted degree (adjacency row sum) per service.
std::map<std::string, std::uint64_t> degree_profile(const ServiceGraph& g);

}  // namespace hge
