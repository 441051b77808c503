#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hge/events.hpp"

namespace hge {

enum class LabelRule { service_only, doctor_service_pair };

LabelRule parse_label_rule(std::string_view text);
std::string_view to_string(LabelRule rule);

struct SyntheticSpec {
  std::size_t n_patients = 200;
  std::size_t n_doctors = 40;
  std::size_t n_services = 100;
  std::size_t n_specialties = 5;
  std::size_t journey_days = 365;
  double noise_rate = 0.05;
  LabelRule label_rule = LabelRule::service_only;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticData {
  std::vector<JourneyEvent> events;
  std::vector<DoctorSpecialty> specialties;
  std::vector<PatientLabel> labels;
  // Services and doctor group that define the positive class.
  std::vector<std::string> marker_services;
  std::vector<std::string> designated_doctors;
};

// Planted structure:
//  * doctor i has specialty i % n_specialties and service j belongs to the
//    vocabulary of specialty j % n_specialties, with Zipf-like frequencies
//    inside each vocabulary;
//  * every patient has a dominant specialty and a primary doctor in it; an
//    event keeps doctor and service inside that group with probability
//    1 - noise_rate, otherwise both are drawn uniformly;
//  * service_only: label 1 iff the journey contains the marker service (a
//    mid-frequency service of specialty 0);
//  * doctor_service_pair: every patient also gets one consult episode pairing
//    a marker or decoy service with a doctor of the designated specialty or a
//    confounding one. Label 1 iff the journey contains the marker service
//    delivered by a designated doctor, so neither the services nor the
//    doctors of a patient determine the label alone.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace hge
