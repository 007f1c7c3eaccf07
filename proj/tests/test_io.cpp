#include <fstream>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "twins/error.hpp"
#include "twins/io.hpp"
#include "twins/pipeline.hpp"
#include "twins/scenario.hpp"

using namespace twins;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("twins_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kMinimal = R"({
  "schema_version": 1,
  "seed": 1,
  "area": {"width": 1.8, "height": 1.8},
  "readers": [{"x": 0.9, "y": 2.3, "facing_deg": -90}],
  "twins": [{"x": 0.9, "y": 0.3}],
  "timing": {"duration": 5}
})";

int error_line(const std::string& text) {
  try {
    scenario::parse_scenario(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("minimal scenario parses") {
  const auto s = scenario::parse_scenario(kMinimal);
  CHECK(s.grid.twins.size() == 1);
  CHECK(s.duration() == 5.0);
  CHECK_FALSE(s.object);
  CHECK(s.hash.size() == 16);
}

TEST_CASE("parse and validation errors carry line numbers") {
  std::string text = kMinimal;
  SUBCASE("syntax error") {
    text.replace(text.find("\"seed\": 1,"), 10, "\"seed\": 1,,");
    CHECK(error_line(text) == 3);
  }
  SUBCASE("unknown key") {
    text.replace(text.find("\"area\""), 6, "\"arena\"");
    CHECK(error_line(text) == 4);
  }
  SUBCASE("bad value") {
    text.replace(text.find("\"width\": 1.8"), 12, "\"width\": -2");
    CHECK(error_line(text) == 4);
  }
  SUBCASE("nested array element") {
    text.replace(text.find("\"y\": 0.3"), 8, "\"y\": \"low\"");
    CHECK(error_line(text) == 6);
  }
  SUBCASE("wrong schema version") {
    text.replace(text.find("\"schema_version\": 1"), 19, "\"schema_version\": 9");
    CHECK(error_line(text) == 2);
  }
  SUBCASE("missing duration without an object") {
    text.replace(text.find("\"timing\": {\"duration\": 5}"), 25, "\"timing\": {}");
    CHECK_THROWS_AS(scenario::parse_scenario(text), ConfigError);
  }
}

TEST_CASE("error messages name the source") {
  try {
    scenario::parse_scenario("{\n  \"seed\": 1\n}", "demo.json");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("demo.json:", 0) == 0);
  }
}

TEST_CASE("scenario hash ignores formatting") {
  std::string compact;
  for (char c : std::string(kMinimal)) {
    if (c != '\n' && c != ' ') compact += c;
  }
  CHECK(scenario::parse_scenario(compact).hash == scenario::parse_scenario(kMinimal).hash);
  std::string other = kMinimal;
  other.replace(other.find("\"seed\": 1"), 9, "\"seed\": 2");
  CHECK(scenario::parse_scenario(other).hash != scenario::parse_scenario(kMinimal).hash);
}

TEST_CASE("json pointer line lookup") {
  const std::string text = kMinimal;
  CHECK(scenario::line_of(text, "/seed") == 3);
  CHECK(scenario::line_of(text, "/area/height") == 4);
  CHECK(scenario::line_of(text, "/twins/0/y") == 6);
  CHECK(scenario::line_of(text, "/nope") == 0);
}

TEST_CASE("shipped scenarios load") {
  for (const char* name : {"reference_warehouse", "static_noise_free", "tiny_3x3"}) {
    CAPTURE(name);
    const auto s = scenario::load_scenario(testing::scenario_path(name));
    CHECK(s.name == name);
    CHECK_NOTHROW(pipeline::prepare(s));
  }
  const auto ref = scenario::load_scenario(testing::scenario_path("reference_warehouse"));
  CHECK(ref.grid.twins.size() == 405);
  CHECK(ref.grid.readers.size() == 81);
  CHECK(ref.trials == 20);
}

TEST_CASE("simulation files round-trip") {
  const auto p = pipeline::prepare(scenario::load_scenario(testing::scenario_path("tiny_3x3")));
  const auto run = pipeline::simulate(p, 11);
  const auto dir = scratch("roundtrip");
  const io::Provenance prov{p.scenario.hash, 11};
  io::write_events(dir / "events.csv", prov, run.events);
  io::write_truth(dir / "truth.csv", prov, run.truth);
  io::write_trace(dir / "trace.csv", prov, run.trace);

  io::Provenance back;
  const auto trace = io::read_trace(dir / "trace.csv", &back);
  CHECK(back.scenario_hash == prov.scenario_hash);
  CHECK(back.seed == 11);
  REQUIRE(trace.size() == run.trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(trace[i].twin == run.trace[i].twin);
    CHECK(trace[i].outcome == run.trace[i].outcome);
    CHECK(trace[i].interval == run.trace[i].interval);
    CHECK(trace[i].round == run.trace[i].round);
    CHECK(trace[i].t == doctest::Approx(run.trace[i].t));
  }
  const auto events = io::read_events(dir / "events.csv");
  REQUIRE(events.size() == run.events.size());
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].kind == run.events[i].kind);
  CHECK(io::read_truth(dir / "truth.csv").size() == run.truth.size());

  // Rewriting what was read gives the same bytes.
  io::write_trace(dir / "trace2.csv", prov, trace);
  CHECK(slurp(dir / "trace.csv") == slurp(dir / "trace2.csv"));

  // Counts rebuilt from the file match the in-memory polling record.
  const auto counts = pipeline::counts_from_trace(trace, static_cast<int>(run.intervals.size()), 10);
  for (std::size_t k = 0; k < run.intervals.size(); ++k) {
    CHECK(counts[k] == tracker::jump_counts(run.intervals[k], 10));
  }
}

TEST_CASE("fingerprint round-trip is exact") {
  const auto p = pipeline::prepare(scenario::load_scenario(testing::scenario_path("tiny_3x3")));
  const auto fp = pipeline::train(p, 2);
  const auto dir = scratch("fingerprint");
  io::write_fingerprint(dir / "fp.txt", {p.scenario.hash, 2}, fp);
  CHECK(io::read_fingerprint(dir / "fp.txt") == fp);
}

TEST_CASE("malformed rows report their line") {
  const auto dir = scratch("malformed");
  {
    std::ofstream out(dir / "truth.csv");
    out << "# scenario_hash=0000000000000000 seed=1\nt_s,x,y\n0,1,2\n0.1,abc,2\n";
  }
  try {
    io::read_truth(dir / "truth.csv");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 4);
  }
  CHECK_THROWS_AS(io::read_trace(dir / "missing.csv"), ConfigError);
}

TEST_CASE("formatting") {
  CHECK(io::fmt(0.1) == "0.1");
  CHECK(io::fmt(1.0 / 3.0) == "0.333333333");
  CHECK(io::Provenance{"abc", 5}.line() == "# scenario_hash=abc seed=5");
}

}  // TEST_SUITE
