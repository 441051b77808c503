#include "hge/events.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hge/error.hpp"

namespace hge {
namespace {

constexpr const char* kEventColumns[] = {"patient_id", "doctor_id", "service_id", "date"};

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void check_field(const std::string& value, const char* name) {
  if (value.find_first_of(",\n\r\"") != std::string::npos) {
    throw InvalidArgument(std::string(name) + " contains a reserved character: " + value);
  }
}

// Reads a CSV with a required header; `columns` gives the expected names in
// any order. Calls `row(fields, line_number)` for every data line.
template <class RowFn>
void read_csv(const std::filesystem::path& path, std::span<const char* const> columns, RowFn&& row) {
  std::ifstream in = open_input(path);
  const std::string source = path.string();
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> order;
  bool have_header = false;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim_cr(line);
    if (is_blank(view)) continue;
    auto fields = split_csv(view);
    if (!have_header) {
      if (fields.size() != columns.size()) {
        throw ParseError(source, line_no, "header must have " + std::to_string(columns.size()) + " columns");
      }
      for (const char* column : columns) {
        const auto it = std::find(fields.begin(), fields.end(), column);
        if (it == fields.end()) throw ParseError(source, line_no, std::string("missing column ") + column);
        order.push_back(static_cast<std::size_t>(it - fields.begin()));
      }
      have_header = true;
      continue;
    }
    if (fields.size() != columns.size()) {
      throw ParseError(source, line_no, "expected " + std::to_string(columns.size()) + " fields, got " +
                                            std::to_string(fields.size()));
    }
    std::vector<std::string> ordered(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) ordered[c] = std::move(fields[order[c]]);
    row(ordered, line_no);
    ++rows;
  }
  if (in.bad()) throw IoError("read failure on " + source);
  if (!have_header) throw ParseError(source, line_no == 0 ? 1 : line_no, "empty file");
  if (rows == 0) throw ParseError(source, line_no, "no data rows");
}

JourneyEvent make_event(std::string patient, std::string doctor, std::string service, std::int64_t day,
                        const std::string& source, std::size_t row) {
  if (patient.empty()) throw ParseError(source, row, "empty patient_id");
  if (doctor.empty()) throw ParseError(source, row, "empty doctor_id");
  if (service.empty()) throw ParseError(source, row, "empty service_id");
  return {std::move(patient), std::move(doctor), std::move(service), day};
}

std::vector<JourneyEvent> load_events_csv(const std::filesystem::path& path) {
  std::vector<JourneyEvent> events;
  const std::string source = path.string();
  read_csv(path, kEventColumns, [&](std::vector<std::string>& f, std::size_t row) {
    std::int64_t day = 0;
    try {
      day = parse_day(f[3]);
    } catch (const InvalidArgument& e) {
      throw ParseError(source, row, e.what());
    }
    events.push_back(make_event(std::move(f[0]), std::move(f[1]), std::move(f[2]), day, source, row));
  });
  return events;
}

std::vector<JourneyEvent> load_events_jsonl(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  const std::string source = path.string();
  std::vector<JourneyEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(trim_cr(line))) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(source, line_no, "expected a JSON object");
    auto str = [&](const char* key) -> std::string {
      const auto it = obj.find(key);
      if (it == obj.end()) throw ParseError(source, line_no, std::string("missing key ") + key);
      if (!it->is_string()) throw ParseError(source, line_no, std::string(key) + " must be a string");
      return it->get<std::string>();
    };
    const auto date = obj.find("date");
    if (date == obj.end()) throw ParseError(source, line_no, "missing key date");
    std::int64_t day = 0;
    if (date->is_number_integer()) {
      day = date->get<std::int64_t>();
    } else if (date->is_string()) {
      try {
        day = parse_day(date->get<std::string>());
      } catch (const InvalidArgument& e) {
        throw ParseError(source, line_no, e.what());
      }
    } else {
      throw ParseError(source, line_no, "date must be a string or integer");
    }
    events.push_back(make_event(str("patient_id"), str("doctor_id"), str("service_id"), day, source, line_no));
  }
  if (in.bad()) throw IoError("read failure on " + source);
  if (events.empty()) throw ParseError(source, line_no == 0 ? 1 : line_no, "empty file");
  return events;
}

}  // namespace

std::int64_t parse_day(std::string_view text) {
  auto parse_int = [&](std::string_view s, auto& value) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    return ec == std::errc() && ptr == s.data() + s.size();
  };
  if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
    int y = 0;
    unsigned m = 0, d = 0;
    if (parse_int(text.substr(0, 4), y) && parse_int(text.substr(5, 2), m) && parse_int(text.substr(8, 2), d)) {
      const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
      if (ymd.ok()) return std::chrono::sys_days{ymd}.time_since_epoch().count();
    }
    throw InvalidArgument("invalid date: " + std::string(text));
  }
  std::int64_t day = 0;
  if (!text.empty() && parse_int(text, day)) return day;
  throw InvalidArgument("invalid date: " + std::string(text));
}

std::string format_day(std::int64_t day) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{day}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

EventFormat event_format_for(const std::filesystem::path& path) {
  const auto ext = path.extension();
  return (ext == ".jsonl" || ext == ".ndjson") ? EventFormat::jsonl : EventFormat::csv;
}

std::vector<JourneyEvent> load_events(const std::filesystem::path& path, EventFormat format) {
  return format == EventFormat::csv ? load_events_csv(path) : load_events_jsonl(path);
}

std::vector<JourneyEvent> load_events(const std::filesystem::path& path) {
  return load_events(path, event_format_for(path));
}

void save_events(const std::filesystem::path& path, std::span<const JourneyEvent> events, EventFormat format) {
  std::ofstream out = open_output(path);
  if (format == EventFormat::csv) {
    out << "patient_id,doctor_id,service_id,date\n";
    for (const auto& e : events) {
      check_field(e.patient_id, "patient_id");
      check_field(e.doctor_id, "doctor_id");
      check_field(e.service_id, "service_id");
      out << e.patient_id << ',' << e.doctor_id << ',' << e.service_id << ',' << format_day(e.day) << '\n';
    }
  } else {
    for (const auto& e : events) {
      nlohmann::ordered_json obj;
      obj["patient_id"] = e.patient_id;
      obj["doctor_id"] = e.doctor_id;
      obj["service_id"] = e.service_id;
      obj["date"] = format_day(e.day);
      out << obj.dump() << '\n';
    }
  }
  if (!out) throw IoError("write failure on " + path.string());
}

std::vector<DoctorSpecialty> load_specialties(const std::filesystem::path& path) {
  static constexpr const char* columns[] = {"doctor_id", "specialty"};
  std::vector<DoctorSpecialty> rows;
  std::set<std::string> seen;
  const std::string source = path.string();
  read_csv(path, columns, [&](std::vector<std::string>& f, std::size_t row) {
    if (f[0].empty()) throw ParseError(source, row, "empty doctor_id");
    if (f[1].empty()) throw ParseError(source, row, "empty specialty");
    if (!seen.insert(f[0]).second) throw ParseError(source, row, "duplicate doctor_id " + f[0]);
    rows.push_back({std::move(f[0]), std::move(f[1])});
  });
  return rows;
}

void save_specialties(const std::filesystem::path& path, std::span<const DoctorSpecialty> rows) {
  std::ofstream out = open_output(path);
  out << "doctor_id,specialty\n";
  for (const auto& r : rows) {
    check_field(r.doctor_id, "doctor_id");
    check_field(r.specialty, "specialty");
    out << r.doctor_id << ',' << r.specialty << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

std::vector<PatientLabel> load_labels(const std::filesystem::path& path) {
  static constexpr const char* columns[] = {"patient_id", "label"};
  std::vector<PatientLabel> rows;
  std::set<std::string> seen;
  const std::string source = path.string();
  read_csv(path, columns, [&](std::vector<std::string>& f, std::size_t row) {
    if (f[0].empty()) throw ParseError(source, row, "empty patient_id");
    if (f[1] != "0" && f[1] != "1") throw ParseError(source, row, "label must be 0 or 1");
    if (!seen.insert(f[0]).second) throw ParseError(source, row, "duplicate patient_id " + f[0]);
    rows.push_back({std::move(f[0]), f[1] == "1" ? 1 : 0});
  });
  return rows;
}

void save_labels(const std::filesystem::path& path, std::span<const PatientLabel> rows) {
  std::ofstream out = open_output(path);
  out << "patient_id,label\n";
  for (const auto& r : rows) {
    check_field(r.patient_id, "patient_id");
    out << r.patient_id << ',' << r.label << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

Journeys sort_journeys(std::span<const JourneyEvent> events) {
  Journeys journeys;
  for (const auto& e : events) journeys[e.patient_id].push_back(e);
  for (auto& [patient, list] : journeys) {
    std::sort(list.begin(), list.end(), [](const JourneyEvent& a, const JourneyEvent& b) {
      return std::tie(a.day, a.service_id, a.doctor_id) < std::tie(b.day, b.service_id, b.doctor_id);
    });
  }
  return journeys;
}

std::vector<JourneyEvent> normalize_days(std::span<const JourneyEvent> events) {
  std::vector<JourneyEvent> out(events.begin(), events.end());
  if (out.empty()) return out;
  const auto min_day = std::min_element(out.begin(), out.end(), [](const auto& a, const auto& b) {
                         return a.day < b.day;
                       })->day;
  for (auto& e : out) e.day -= min_day;
  return out;
}

}  // namespace hge
