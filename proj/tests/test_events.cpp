#include <doctest.h>

#include <fstream>

#include "hge/error.hpp"
#include "hge/events.hpp"
#include "support.hpp"

using namespace hge;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("one well-formed csv row loads as one event") {
  test::TempDir dir("events");
  write_file(dir / "e.csv", "patient_id,doctor_id,service_id,date\nP1,D1,S1,2021-03-04\n");
  const auto events = load_events(dir / "e.csv");
  REQUIRE(events.size() == 1);
  CHECK(events[0].patient_id == "P1");
  CHECK(events[0].doctor_id == "D1");
  CHECK(events[0].service_id == "S1");
  CHECK(format_day(events[0].day) == "2021-03-04");
}

TEST_CASE("columns may appear in any order and integer days are accepted") {
  test::TempDir dir("events");
  write_file(dir / "e.csv", "date,service_id,patient_id,doctor_id\n17,S1,P1,D1\n\n-3,S2,P1,D2\n");
  const auto events = load_events(dir / "e.csv");
  REQUIRE(events.size() == 2);
  CHECK(events[0] == JourneyEvent{"P1", "D1", "S1", 17});
  CHECK(events[1] == JourneyEvent{"P1", "D2", "S2", -3});
}

TEST_CASE("empty service_id is a parse error naming the row") {
  test::TempDir dir("events");
  write_file(dir / "e.csv", "patient_id,doctor_id,service_id,date\nP1,D1,S1,2021-01-01\nP1,D1,,2021-01-02\n");
  try {
    load_events(dir / "e.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);
    CHECK(std::string(e.what()).find("service_id") != std::string::npos);
  }
}

TEST_CASE("malformed inputs are rejected") {
  test::TempDir dir("events");
  write_file(dir / "empty.csv", "");
  CHECK_THROWS_AS(load_events(dir / "empty.csv"), ParseError);
  write_file(dir / "header.csv", "patient_id,doctor_id,service_id,date\n");
  CHECK_THROWS_AS(load_events(dir / "header.csv"), ParseError);
  write_file(dir / "fields.csv", "patient_id,doctor_id,service_id,date\nP1,D1,S1\n");
  CHECK_THROWS_AS(load_events(dir / "fields.csv"), ParseError);
  write_file(dir / "date.csv", "patient_id,doctor_id,service_id,date\nP1,D1,S1,2021-02-30\n");
  CHECK_THROWS_AS(load_events(dir / "date.csv"), ParseError);
  write_file(dir / "missing.csv", "patient_id,doctor_id,date\nP1,D1,2021-01-01\n");
  CHECK_THROWS_AS(load_events(dir / "missing.csv"), ParseError);
  CHECK_THROWS_AS(load_events(dir / "absent.csv"), IoError);
  write_file(dir / "bad.jsonl", "{\"patient_id\":\"P1\",\"doctor_id\":\"D1\",\"service_id\":\"S1\"}\n");
  CHECK_THROWS_AS(load_events(dir / "bad.jsonl"), ParseError);
}

TEST_CASE("jsonl accepts string and integer dates") {
  test::TempDir dir("events");
  write_file(dir / "e.jsonl",
             "{\"patient_id\":\"P1\",\"doctor_id\":\"D1\",\"service_id\":\"S1\",\"date\":\"1970-01-03\"}\n"
             "{\"patient_id\":\"P2\",\"doctor_id\":\"D2\",\"service_id\":\"S2\",\"date\":5}\n");
  const auto events = load_events(dir / "e.jsonl");
  REQUIRE(events.size() == 2);
  CHECK(events[0].day == 2);
  CHECK(events[1].day == 5);
}

TEST_CASE("save then load is the identity on random event lists") {
  test::TempDir dir("events");
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<JourneyEvent> events = test::random_events(rng, 8, 10, 5, 3000, 6);
    for (auto& e : events) e.day += 18000;
    for (auto format : {EventFormat::csv, EventFormat::jsonl}) {
      const auto path = dir / (format == EventFormat::csv ? "r.csv" : "r.jsonl");
      save_events(path, events, format);
      CHECK(load_events(path) == events);
    }
  }
}

TEST_CASE("ids with reserved characters cannot be written to csv") {
  test::TempDir dir("events");
  const std::vector<JourneyEvent> events{{"P,1", "D", "S", 0}};
  CHECK_THROWS_AS(save_events(dir / "x.csv", events, EventFormat::csv), InvalidArgument);
}

TEST_CASE("specialty and label files round-trip and validate") {
  test::TempDir dir("events");
  const std::vector<DoctorSpecialty> specs{{"D1", "cardio"}, {"D2", "onco"}};
  save_specialties(dir / "s.csv", specs);
  CHECK(load_specialties(dir / "s.csv") == specs);
  const std::vector<PatientLabel> labels{{"P1", 0}, {"P2", 1}};
  save_labels(dir / "l.csv", labels);
  CHECK(load_labels(dir / "l.csv") == labels);

  write_file(dir / "bad.csv", "patient_id,label\nP1,2\n");
  CHECK_THROWS_AS(load_labels(dir / "bad.csv"), ParseError);
  write_file(dir / "dup.csv", "patient_id,label\nP1,1\nP1,0\n");
  CHECK_THROWS_AS(load_labels(dir / "dup.csv"), ParseError);
  write_file(dir / "dupd.csv", "doctor_id,specialty\nD1,a\nD1,b\n");
  CHECK_THROWS_AS(load_specialties(dir / "dupd.csv"), ParseError);
}

TEST_CASE("sort_journeys orders by day then service then doctor") {
  const std::vector<JourneyEvent> reversed{{"P", "D", "S3", 9}, {"P", "D", "S2", 5}, {"P", "D", "S1", 1}};
  const auto sorted = sort_journeys(reversed).at("P");
  CHECK(sorted[0].day == 1);
  CHECK(sorted[1].day == 5);
  CHECK(sorted[2].day == 9);

  const std::vector<JourneyEvent> ties{{"P", "D", "B", 4}, {"P", "D", "A", 4}};
  const auto tied = sort_journeys(ties).at("P");
  CHECK(tied[0].service_id == "A");
  CHECK(tied[1].service_id == "B");
}

TEST_CASE("sort_journeys is invariant under permutation of its input") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto events = test::random_events(rng, 5, 6, 4, 30, 8);
    const Journeys reference = sort_journeys(events);
    rng.shuffle(events);
    CHECK(sort_journeys(events) == reference);
  }
}

TEST_CASE("day parsing and normalization") {
  CHECK(parse_day("1970-01-01") == 0);
  CHECK(parse_day("2000-03-01") - parse_day("2000-02-28") == 2);
  CHECK(parse_day("42") == 42);
  CHECK(format_day(parse_day("2024-02-29")) == "2024-02-29");
  CHECK_THROWS_AS(parse_day("2023-02-29"), InvalidArgument);
  CHECK_THROWS_AS(parse_day("yesterday"), InvalidArgument);

  const std::vector<JourneyEvent> events{{"P", "D", "S", 100}, {"Q", "D", "S", 90}};
  const auto normalized = normalize_days(events);
  CHECK(normalized[0].day == 10);
  CHECK(normalized[1].day == 0);
  CHECK(event_format_for("x/y.jsonl") == EventFormat::jsonl);
  CHECK(event_format_for("x/y.csv") == EventFormat::csv);
}
