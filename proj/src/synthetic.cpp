#include "hge/synthetic.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "hge/error.hpp"
#include "hge/random.hpp"

namespace hge {

LabelRule parse_label_rule(std::string_view text) {
  if (text == "service_only") return LabelRule::service_only;
  if (text == "doctor_service_pair") return LabelRule::doctor_service_pair;
  throw InvalidArgument("unknown label rule '" + std::string(text) + "'");
}

std::string_view to_string(LabelRule rule) {
  return rule == LabelRule::service_only ? "service_only" : "doctor_service_pair";
}

void SyntheticSpec::validate() const {
  if (n_patients == 0 || n_doctors == 0 || n_services == 0 || n_specialties == 0 || journey_days == 0) {
    throw InvalidArgument("synthetic: all counts must be positive");
  }
  if (n_specialties > n_doctors) throw InvalidArgument("synthetic: n_specialties must not exceed n_doctors");
  if (n_specialties > n_services) throw InvalidArgument("synthetic: n_specialties must not exceed n_services");
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw InvalidArgument("synthetic: noise_rate must lie in [0, 1]");
  if (label_rule == LabelRule::doctor_service_pair) {
    if (n_specialties < 2) throw InvalidArgument("synthetic: doctor_service_pair needs at least 2 specialties");
    if (n_services < 2 * n_specialties) {
      throw InvalidArgument("synthetic: doctor_service_pair needs at least 2 services per specialty");
    }
  }
}

namespace {

constexpr std::int64_t kBaseDay = 18628;  // 2021-01-01
constexpr std::size_t kMinVisits = 6;
constexpr std::size_t kMaxVisits = 12;
constexpr std::size_t kMaxEventsPerVisit = 3;
constexpr double kPrimaryShare = 0.7;
constexpr std::size_t kConsultVisits = 2;

std::string make_id(char prefix, std::size_t index, std::size_t count) {
  std::string digits = std::to_string(index + 1);
  const std::size_t width = std::max<std::size_t>(3, std::to_string(count).size());
  return std::string(1, prefix) + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t S = spec.n_specialties;
  const bool pair_rule = spec.label_rule == LabelRule::doctor_service_pair;
  Rng rng(spec.seed);

  std::vector<std::string> patients, doctors, services;
  for (std::size_t i = 0; i < spec.n_patients; ++i) patients.push_back(make_id('P', i, spec.n_patients));
  for (std::size_t i = 0; i < spec.n_doctors; ++i) doctors.push_back(make_id('D', i, spec.n_doctors));
  for (std::size_t i = 0; i < spec.n_services; ++i) services.push_back(make_id('S', i, spec.n_services));

  std::vector<std::vector<std::size_t>> group_doctors(S), vocab(S);
  for (std::size_t d = 0; d < spec.n_doctors; ++d) group_doctors[d % S].push_back(d);
  for (std::size_t s = 0; s < spec.n_services; ++s) vocab[s % S].push_back(s);

  // Pair rule: the designated group is specialty 0 and the confounding group
  // specialty 1. Marker and decoy are the rarest services of those two
  // vocabularies and only appear through consults or noise.
  const std::size_t designated = 0, confounder = 1 % S;
  const std::size_t marker = pair_rule ? vocab[designated].back() : vocab[0][std::min<std::size_t>(2, vocab[0].size() - 1)];
  const std::size_t decoy = pair_rule ? vocab[confounder].back() : marker;

  std::vector<AliasTable> service_tables;
  std::vector<std::vector<std::size_t>> drawable(S);
  for (std::size_t g = 0; g < S; ++g) {
    std::vector<double> weights;
    for (std::size_t r = 0; r < vocab[g].size(); ++r) {
      const std::size_t s = vocab[g][r];
      if (pair_rule && (s == marker || s == decoy)) continue;
      drawable[g].push_back(s);
      weights.push_back(1.0 / static_cast<double>(r + 1));
    }
    service_tables.emplace_back(weights);
  }

  SyntheticData out;
  for (std::size_t d = 0; d < spec.n_doctors; ++d) {
    out.specialties.push_back({doctors[d], "SP" + std::to_string(d % S)});
  }

  const auto days = static_cast<std::uint64_t>(spec.journey_days);
  for (std::size_t p = 0; p < spec.n_patients; ++p) {
    const std::size_t group = rng.below(S);
    const auto& team = group_doctors[group];
    const std::size_t primary = team[rng.below(team.size())];
    std::vector<JourneyEvent> journey;
    auto push = [&](std::size_t d, std::size_t s, std::int64_t day) {
      journey.push_back({patients[p], doctors[d], services[s], kBaseDay + day});
    };

    const std::size_t visits = kMinVisits + rng.below(kMaxVisits - kMinVisits + 1);
    for (std::size_t v = 0; v < visits; ++v) {
      const auto day = static_cast<std::int64_t>(rng.below(days));
      const std::size_t count = 1 + rng.below(kMaxEventsPerVisit);
      for (std::size_t e = 0; e < count; ++e) {
        if (rng.bernoulli(spec.noise_rate)) {
          const std::size_t d = rng.below(spec.n_doctors);
          push(d, rng.below(spec.n_services), day);
        } else {
          const std::size_t d = rng.bernoulli(kPrimaryShare) ? primary : team[rng.below(team.size())];
          push(d, drawable[group][service_tables[group].sample(rng)], day);
        }
      }
    }

    if (pair_rule) {
      // (marker, designated) : (marker, confounder) : (decoy, designated) = 2 : 1 : 1
      const double u = rng.uniform();
      const std::size_t service = u < 0.75 ? marker : decoy;
      const std::size_t doctor_group = (u < 0.5 || u >= 0.75) ? designated : confounder;
      const auto& consult_team = group_doctors[doctor_group];
      const std::size_t doctor = consult_team[rng.below(consult_team.size())];
      for (std::size_t v = 0; v < kConsultVisits; ++v) push(doctor, service, static_cast<std::int64_t>(rng.below(days)));
    }

    bool positive = false;
    for (const auto& e : journey) {
      const bool has_marker = e.service_id == services[marker];
      if (!has_marker) continue;
      if (!pair_rule) {
        positive = true;
      } else {
        const auto d = static_cast<std::size_t>(std::find(doctors.begin(), doctors.end(), e.doctor_id) - doctors.begin());
        positive = positive || d % S == designated;
      }
    }
    out.labels.push_back({patients[p], positive ? 1 : 0});

    std::sort(journey.begin(), journey.end(), [](const JourneyEvent& a, const JourneyEvent& b) {
      return std::tie(a.day, a.service_id, a.doctor_id) < std::tie(b.day, b.service_id, b.doctor_id);
    });
    out.events.insert(out.events.end(), journey.begin(), journey.end());
  }

  out.marker_services.push_back(services[marker]);
  if (pair_rule) {
    for (std::size_t d : group_doctors[designated]) out.designated_doctors.push_back(doctors[d]);
  }
  return out;
}

}  // namespace hge
