#pragma once

// Shared fixtures and brute-force reference implementations for the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "hge/events.hpp"
#include "hge/linalg.hpp"
#include "hge/random.hpp"

namespace hge::test {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("hge_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.uniform(-scale, scale);
  return m;
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

// Random events over small id pools.
inline std::vector<JourneyEvent> random_events(Rng& rng, std::size_t max_patients, std::size_t max_services,
                                               std::size_t max_doctors, std::int64_t max_day,
                                               std::size_t max_events_per_patient) {
  std::vector<JourneyEvent> events;
  const std::size_t patients = 1 + rng.below(max_patients);
  for (std::size_t p = 0; p < patients; ++p) {
    const std::size_t n = 1 + rng.below(max_events_per_patient);
    for (std::size_t e = 0; e < n; ++e) {
      events.push_back({"p" + std::to_string(p), "d" + std::to_string(rng.below(max_doctors)),
                        "s" + std::to_string(rng.below(max_services)),
                        static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(max_day) + 1))});
    }
  }
  rng.shuffle(events);
  return events;
}

// Window pair counts by explicit enumeration of window intervals.
inline std::map<std::pair<std::string, std::string>, std::uint64_t> brute_cooccurrence(
    const std::vector<JourneyEvent>& events, std::int64_t T) {
  std::map<std::string, std::vector<const JourneyEvent*>> by_patient;
  for (const auto& e : events) by_patient[e.patient_id].push_back(&e);
  std::map<std::pair<std::string, std::string>, std::uint64_t> counts;
  for (const auto& [patient, list] : by_patient) {
    std::int64_t first = list.front()->day, last = list.front()->day;
    for (const auto* e : list) {
      first = std::min(first, e->day);
      last = std::max(last, e->day);
    }
    for (std::int64_t start = first; start <= last; start += T) {
      std::set<std::string> window;
      for (const auto* e : list) {
        if (e->day >= start && e->day < start + T) window.insert(e->service_id);
      }
      for (const auto& a : window) {
        for (const auto& b : window) {
          if (a < b) ++counts[{a, b}];
        }
      }
    }
  }
  return counts;
}

inline std::map<std::tuple<std::string, std::string, std::string>, std::uint64_t> brute_triples(
    const std::vector<JourneyEvent>& events) {
  std::map<std::tuple<std::string, std::string, std::string>, std::uint64_t> counts;
  for (const auto& e : events) ++counts[{e.patient_id, e.service_id, e.doctor_id}];
  return counts;
}

// Scalar evaluation of alpha_i = softmax_i(LeakyReLU(a . [W d || W s_i])) without
// max shifting.
inline std::vector<double> scalar_attention(const std::vector<double>& d, const std::vector<std::vector<double>>& s,
                                            const Matrix& W, const std::vector<double>& a, double slope) {
  const std::size_t out = W.rows(), in = W.cols();
  std::vector<double> wd(out, 0.0);
  for (std::size_t r = 0; r < out; ++r) {
    for (std::size_t c = 0; c < in; ++c) wd[r] += W(r, c) * d[c];
  }
  std::vector<double> scores;
  double total = 0.0;
  for (const auto& si : s) {
    double e = 0.0;
    for (std::size_t r = 0; r < out; ++r) {
      double ws = 0.0;
      for (std::size_t c = 0; c < in; ++c) ws += W(r, c) * si[c];
      e += a[r] * wd[r] + a[out + r] * ws;
    }
    e = e > 0 ? e : slope * e;
    scores.push_back(std::exp(e));
    total += scores.back();
  }
  for (double& x : scores) x /= total;
  return scores;
}

// Pooled and per-class F1 from an explicit confusion matrix.
inline std::pair<double, double> brute_f1(const std::vector<int>& truth, const std::vector<int>& pred) {
  double per_class[2];
  for (int c = 0; c < 2; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == c && truth[i] == c) ++tp;
      if (pred[i] == c && truth[i] != c) ++fp;
      if (pred[i] != c && truth[i] == c) ++fn;
    }
    // 2PR / (P + R) with P = tp / (tp + fp), R = tp / (tp + fn), cleared of
    // fractions in integers so the single final division rounds once.
    const std::uint64_t num = 2 * tp * tp;
    const std::uint64_t den = tp * (tp + fn) + tp * (tp + fp);
    per_class[c] = tp == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == pred[i];
  // Pooled over both classes: sum tp = correct, sum fp = sum fn = wrong.
  const double micro = static_cast<double>(correct) / static_cast<double>(truth.size());
  return {micro, (per_class[0] + per_class[1]) / 2.0};
}

// Max relative error between analytic and central-difference gradients.
template <class Loss>
double fd_check(std::span<double> params, std::span<const double> analytic, Loss&& loss, double h = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss();
    params[i] = saved - h;
    const double down = loss();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(numeric - analytic[i]) / std::max({1e-4, std::abs(numeric), std::abs(analytic[i])});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace hge::test
