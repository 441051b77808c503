#include "hge/random.hpp"

#include <numeric>

#include "hge/error.hpp"

namespace hge {

AliasTable::AliasTable(std::span<const double> weights) {
  const std::size_t n = weights.size();
  if (n == 0) throw InvalidArgument("alias table: empty weight vector");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InvalidArgument("alias table: negative or NaN weight");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidArgument("alias table: weights sum to zero");

  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::size_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back();
    small.pop_back();
    const std::size_t l = large.back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] -= 1.0 - scaled[s];
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers are 1 up to rounding.
  for (std::size_t i : large) {
    prob_[i] = 1.0;
    alias_[i] = i;
  }
  for (std::size_t i : small) {
    prob_[i] = 1.0;
    alias_[i] = i;
  }
}

double AliasTable::probability(std::size_t i) const {
  double p = prob_[i];
  for (std::size_t c = 0; c < prob_.size(); ++c) {
    if (alias_[c] == i && c != i) p += 1.0 - prob_[c];
  }
  return p / static_cast<double>(prob_.size());
}

}  // namespace hge
