#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hge {

// One (patient, doctor, service, day) record. `day` counts days since
// 1970-01-01.
struct JourneyEvent {
  std::string patient_id;
  std::string doctor_id;
  std::string service_id;
  std::int64_t day = 0;

  bool operator==(const JourneyEvent&) const = default;
};

struct DoctorSpecialty {
  std::string doctor_id;
  std::string specialty;

  bool operator==(const DoctorSpecialty&) const = default;
};

struct PatientLabel {
  std::string patient_id;
  int label = 0;

  bool operator==(const PatientLabel&) const = default;
};

enum class EventFormat { csv, jsonl };

// Per-patient event lists, chronologically sorted.
using Journeys = std::map<std::string, std::vector<JourneyEvent>>;

// Accepts `YYYY-MM-DD` or a plain (possibly negative) integer day index.
std::int64_t parse_day(std::string_view text);
std::string format_day(std::int64_t day);

// `.jsonl` / `.ndjson` select jsonl; everything else is csv.
EventFormat event_format_for(const std::filesystem::path& path);

std::vector<JourneyEvent> load_events(const std::filesystem::path& path, EventFormat format);
std::vector<JourneyEvent> load_events(const std::filesystem::path& path);
void save_events(const std::filesystem::path& path, std::span<const JourneyEvent> events,
                 EventFormat format);

std::vector<DoctorSpecialty> load_specialties(const std::filesystem::path& path);
void save_specialties(const std::filesystem::path& path, std::span<const DoctorSpecialty> rows);

std::vector<PatientLabel> load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, std::span<const PatientLabel> rows);

// Groups by patient and sorts each list by (day, service_id, doctor_id).
Journeys sort_journeys(std::span<const JourneyEvent> events);

// Shifts every day so the corpus minimum becomes day 0.
std::vector<JourneyEvent> normalize_days(std::span<const JourneyEvent> events);

}  // namespace hge
