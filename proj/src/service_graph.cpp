#include "hge/service_graph.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <unordered_map>

#include "hge/error.hpp"

namespace hge {
namespace {

using PairCounts = std::map<std::pair<NodeIndex, NodeIndex>, std::uint64_t>;

void count_journey(const std::vector<JourneyEvent>& journey, std::int64_t window_days,
                   const std::unordered_map<std::string, NodeIndex>& index, PairCounts& counts) {
  if (journey.empty()) return;
  const std::int64_t first_day = journey.front().day;
  std::size_t i = 0;
  std::vector<NodeIndex> present;
  while (i < journey.size()) {
    const std::int64_t window = (journey[i].day - first_day) / window_days;
    present.clear();
    while (i < journey.size() && (journey[i].day - first_day) / window_days == window) {
      present.push_back(index.at(journey[i].service_id));
      ++i;
    }
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());
    for (std::size_t a = 0; a < present.size(); ++a) {
      for (std::size_t b = a + 1; b < present.size(); ++b) ++counts[{present[a], present[b]}];
    }
  }
}

}  // namespace

ServiceGraph build_cooccurrence(const Journeys& journeys, std::int64_t window_days, unsigned threads) {
  if (window_days < 1) throw InvalidArgument("window_days must be >= 1, got " + std::to_string(window_days));
  std::set<std::string> services;
  for (const auto& [patient, journey] : journeys) {
    for (std::size_t k = 0; k < journey.size(); ++k) {
      if (k > 0 && journey[k].day < journey[k - 1].day) {
        throw InvalidArgument("journey for patient " + patient + " is not sorted by day");
      }
      services.insert(journey[k].service_id);
    }
  }
  std::vector<std::string> ids(services.begin(), services.end());
  std::unordered_map<std::string, NodeIndex> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = static_cast<NodeIndex>(i);

  std::vector<const std::vector<JourneyEvent>*> lists;
  lists.reserve(journeys.size());
  for (const auto& [patient, journey] : journeys) lists.push_back(&journey);

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(lists.size(), 1));
  std::vector<PairCounts> partial(workers);
  auto work = [&](std::size_t w) {
    for (std::size_t p = w; p < lists.size(); p += workers) count_journey(*lists[p], window_days, index, partial[w]);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::future<void>> tasks;
    for (std::size_t w = 0; w < workers; ++w) tasks.push_back(std::async(std::launch::async, work, w));
    for (auto& t : tasks) t.get();
  }
  PairCounts merged;
  for (const auto& part : partial) {
    for (const auto& [key, c] : part) merged[key] += c;
  }
  std::vector<WeightedEdge> edges;
  edges.reserve(merged.size());
  for (const auto& [key, c] : merged) edges.push_back({key.first, key.second, c});
  return ServiceGraph(std::move(ids), edges);
}

std::map<std::string, std::uint64_t> degree_profile(const ServiceGraph& g) {
  std::map<std::string, std::uint64_t> out;
  for (NodeIndex i = 0; i < g.size(); ++i) out[g.id(i)] = g.weighted_degree(i);
  return out;
}

}  // namespace hge
