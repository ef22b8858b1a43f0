#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "logdiag/diagnosis_parser.hpp"

using namespace logdiag;

namespace {

const char* kCanonicalResponse =
    "==Conclusion==\n"
    "Component server-a failed. The most relevant error is: Server "
    "encountered an error, shutting down\n"
    "\n"
    "==Investigation Steps==\n"
    "1. Scanned 3 log sections.\n"
    "2. The driver logs name the failing component: server-a.\n"
    "3. Selected the most recent error-level lines.\n"
    "\n"
    "==Most Relevant Log Lines==\n"
    "- log-file-name: server-a.error\n"
    "- timestamp: 2025-09-17-16:59:41\n"
    "- callsite: file2.py:41\n"
    "**content**: Server encountered an error, shutting down\n";

LogBundle listing_bundle() {
  LogLine info;
  info.timestamp = *Timestamp::parse("2025-09-17-14:12:32");
  info.datacenter = "dc7";
  info.process = "p41";
  info.thread = "t-2";
  info.callsite = "file.py:444";
  info.message = "Server is starting";

  LogLine error;
  error.timestamp = *Timestamp::parse("2025-09-17-16:59:41");
  error.datacenter = "dc3";
  error.process = "p13";
  error.thread = "t-7";
  error.callsite = "file2.py:41";
  error.message = "Server encountered an error, shutting down";

  return make_bundle(
      "listing",
      {make_log_file("server-a", LogLevel::Info, false, {info}),
       make_log_file("server-a", LogLevel::Error, false, {error})},
      {});
}

}  // namespace

TEST_CASE("parse_response extracts the three sections") {
  const Diagnosis d = parse_response(kCanonicalResponse);
  REQUIRE(d.conclusion);
  CHECK(d.conclusion->find("server-a failed") != std::string::npos);
  REQUIRE(d.investigation_steps);
  CHECK(d.investigation_steps->find("1. Scanned") == 0);
  CHECK(d.has_citations_section);
  REQUIRE(d.cited_lines.size() == 1);
  CHECK(d.cited_lines[0].log_file_name == "server-a.error");
  REQUIRE(d.cited_lines[0].timestamp);
  CHECK(d.cited_lines[0].timestamp->to_string() == "2025-09-17-16:59:41");
  REQUIRE(d.cited_lines[0].callsite);
  CHECK(*d.cited_lines[0].callsite == "file2.py:41");
  CHECK(d.cited_lines[0].content ==
        "Server encountered an error, shutting down");
  CHECK(d.parse_warnings.empty());
}

TEST_CASE("parse_response is total") {
  SUBCASE("empty input") {
    const Diagnosis d = parse_response("");
    CHECK_FALSE(d.conclusion);
    CHECK(d.cited_lines.empty());
    REQUIRE(d.parse_warnings.size() == 1);
    CHECK(d.parse_warnings[0] == "no headers found");
  }
  SUBCASE("headerless free text") {
    const Diagnosis d = parse_response("the model rambled on\nwithout format");
    CHECK_FALSE(d.conclusion);
    CHECK(d.parse_warnings.size() == 1);
  }
}

TEST_CASE("header decoration is tolerated") {
  const std::string decorated =
      "## ==Conclusion==\nIt broke.\n\n**==Investigation Steps==**\nsteps\n\n"
      "  ==Most Relevant Log Lines==  \n"
      "- log-file-name: a.error\n- timestamp:\n- callsite:\n"
      "**content**: boom\n";
  const Diagnosis d = parse_response(decorated);
  REQUIRE(d.conclusion);
  CHECK(*d.conclusion == "It broke.");
  REQUIRE(d.investigation_steps);
  REQUIRE(d.cited_lines.size() == 1);
  CHECK_FALSE(d.cited_lines[0].timestamp);  // empty field stays empty
  CHECK_FALSE(d.cited_lines[0].callsite);
  CHECK(d.parse_warnings.empty());
}

TEST_CASE("citation groups may omit the dash prefix and repeat") {
  const std::string text =
      "==Conclusion==\nx\n\n==Most Relevant Log Lines==\n"
      "log-file-name: a.error\ntimestamp: 2025-09-17-14:12:32\ncallsite: f:1\n"
      "content: first\n"
      "\n"
      "- log-file-name: b.error\n- timestamp:\n- callsite: g:2\n"
      "**content**: second\n";
  const Diagnosis d = parse_response(text);
  REQUIRE(d.cited_lines.size() == 2);
  CHECK(d.cited_lines[0].content == "first");
  CHECK(d.cited_lines[1].content == "second");
  CHECK(d.parse_warnings.empty());
}

TEST_CASE("malformed citation groups become warnings") {
  const std::string text =
      "==Conclusion==\nx\n\n==Most Relevant Log Lines==\n"
      "- log-file-name: a.error\n- timestamp: 2025-09-17-14:12:32\n"
      "\n"
      "- log-file-name: b.error\n**content**: fine\n";
  const Diagnosis d = parse_response(text);
  REQUIRE(d.cited_lines.size() == 1);  // first group lacks content
  CHECK(d.cited_lines[0].log_file_name == "b.error");
  REQUIRE(d.parse_warnings.size() == 1);
  CHECK(d.parse_warnings[0].find("a.error") != std::string::npos);
}

TEST_CASE("classify_outcome follows the decision table") {
  SUBCASE("conclusion plus citations is conclusive") {
    const Diagnosis d = parse_response(kCanonicalResponse);
    CHECK(classify_outcome(d) == Outcome::Conclusive);
  }
  SUBCASE("refusal phrases yield InsufficientInformation") {
    const std::string refusal =
        "==Investigation Steps==\n1. Scanned sections.\n2. I need access to "
        "those logs and must not draw any conclusion.\n\n"
        "==Most Relevant Log Lines==\n";
    const Diagnosis d = parse_response(refusal);
    CHECK_FALSE(d.conclusion);
    CHECK(classify_outcome(d) == Outcome::InsufficientInformation);
  }
  SUBCASE("headerless text is unparseable") {
    CHECK(classify_outcome(parse_response("free text")) == Outcome::Unparseable);
  }
  SUBCASE("conclusion without citations is unparseable") {
    const Diagnosis d = parse_response("==Conclusion==\nit broke\n");
    CHECK(classify_outcome(d) == Outcome::Unparseable);
  }
  SUBCASE("refusal phrase detection is case-insensitive") {
    const Diagnosis d =
        parse_response("==Investigation Steps==\nNOT ENOUGH INFORMATION\n");
    CHECK(classify_outcome(d) == Outcome::InsufficientInformation);
  }
}

TEST_CASE("resolve_citations matches content, then timestamp, then callsite") {
  const LogBundle bundle = listing_bundle();

  SUBCASE("excerpt resolves to the error line") {
    Diagnosis d;
    d.conclusion = "x";
    d.has_citations_section = true;
    d.cited_lines.push_back(
        {"server-a.error", std::nullopt, std::nullopt, "shutting down"});
    const ResolvedDiagnosis r = resolve_citations(d, bundle);
    REQUIRE(r.resolutions.size() == 1);
    REQUIRE(r.resolutions[0].resolved);
    CHECK(r.resolutions[0].resolved->first == "server-a.error");
    CHECK(r.resolutions[0].resolved->second == 0);
    CHECK(r.outcome == Outcome::Conclusive);
  }
  SUBCASE("unknown file stays unresolved with a warning") {
    Diagnosis d;
    d.cited_lines.push_back(
        {"server-z.error", std::nullopt, std::nullopt, "anything"});
    const ResolvedDiagnosis r = resolve_citations(d, bundle);
    REQUIRE(r.resolutions.size() == 1);
    CHECK_FALSE(r.resolutions[0].resolved);
    CHECK_FALSE(r.diagnosis.parse_warnings.empty());
  }
  SUBCASE("content absent from the file stays unresolved") {
    Diagnosis d;
    d.cited_lines.push_back(
        {"server-a.error", std::nullopt, std::nullopt, "no such text"});
    const ResolvedDiagnosis r = resolve_citations(d, bundle);
    CHECK_FALSE(r.resolutions[0].resolved);
  }
  SUBCASE("timestamp disambiguates duplicated content") {
    // Exhaustive check over a two-line file with identical messages.
    LogLine first, second;
    first.timestamp = *Timestamp::parse("2025-09-17-10:00:00");
    first.datacenter = second.datacenter = "dc1";
    first.process = second.process = "p1";
    first.thread = second.thread = "t-0";
    first.callsite = "a.cc:1";
    second.callsite = "a.cc:2";
    first.message = second.message = "duplicate payload";
    second.timestamp = *Timestamp::parse("2025-09-17-11:00:00");
    first.line_index = 0;
    second.line_index = 1;
    const LogBundle two = make_bundle(
        "two", {make_log_file("c", LogLevel::Info, false, {first, second})}, {});

    for (int target = 0; target < 2; ++target) {
      Diagnosis d;
      d.cited_lines.push_back(
          {"c.info",
           *Timestamp::parse(target == 0 ? "2025-09-17-10:00:00"
                                         : "2025-09-17-11:00:00"),
           std::nullopt, "duplicate payload"});
      const ResolvedDiagnosis r = resolve_citations(d, two);
      REQUIRE(r.resolutions[0].resolved);
      CHECK(r.resolutions[0].resolved->second == target);
    }

    // Without a timestamp the earliest line wins; a callsite overrides.
    Diagnosis d;
    d.cited_lines.push_back({"c.info", std::nullopt, std::nullopt,
                             "duplicate payload"});
    CHECK(resolve_citations(d, two).resolutions[0].resolved->second == 0);
    Diagnosis d2;
    d2.cited_lines.push_back({"c.info", std::nullopt, std::string("a.cc:2"),
                              "duplicate payload"});
    CHECK(resolve_citations(d2, two).resolutions[0].resolved->second == 1);
  }
}

TEST_CASE("resolution never points at a line missing the cited content") {
  std::mt19937_64 rng(9);
  auto below = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  const std::int64_t base = Timestamp{2025, 9, 17, 6, 0, 0}.epoch_seconds();

  std::vector<LogLine> lines;
  for (int i = 0; i < 200; ++i) {
    LogLine line;
    line.timestamp = Timestamp::from_epoch_seconds(base + below(60));
    line.datacenter = "dc1";
    line.process = "p1";
    line.thread = "t-0";
    line.callsite = "x.cc:" + std::to_string(below(5));
    line.message = "payload " + std::to_string(below(30));
    line.line_index = i;
    lines.push_back(std::move(line));
  }
  const LogBundle bundle = make_bundle(
      "r", {make_log_file("c", LogLevel::Info, false, std::move(lines))}, {});

  for (int i = 0; i < 300; ++i) {
    Diagnosis d;
    d.cited_lines.push_back({"c.info",
                             Timestamp::from_epoch_seconds(base + below(70)),
                             std::string("x.cc:" + std::to_string(below(6))),
                             "payload " + std::to_string(below(40))});
    const ResolvedDiagnosis r = resolve_citations(d, bundle);
    if (r.resolutions[0].resolved) {
      const auto& [file, idx] = *r.resolutions[0].resolved;
      const LogFile* f = bundle.find_file(file);
      REQUIRE(f);
      CHECK(f->lines[idx].message.find(d.cited_lines[0].content) !=
            std::string::npos);
    }
  }
}

TEST_CASE("render and parse round trip") {
  SUBCASE("canonical text reparses to an equal diagnosis") {
    const Diagnosis d = parse_response(kCanonicalResponse);
    const std::string rendered = render_diagnosis(d);
    CHECK(rendered == normalize_response(kCanonicalResponse));
    const Diagnosis again = parse_response(rendered);
    CHECK(again.conclusion == d.conclusion);
    CHECK(again.investigation_steps == d.investigation_steps);
    CHECK(again.cited_lines == d.cited_lines);
    CHECK(again.parse_warnings.empty());
  }
  SUBCASE("generated diagnoses survive parse(render(d))") {
    std::mt19937_64 rng(11);
    auto below = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
    for (int round = 0; round < 100; ++round) {
      Diagnosis d;
      d.conclusion = "conclusion " + std::to_string(below(1000));
      d.investigation_steps =
          "1. step\n2. another step " + std::to_string(below(1000));
      d.has_citations_section = true;
      const int cites = below(4);
      for (int c = 0; c < cites; ++c) {
        CitedLogLine cite;
        cite.log_file_name = "comp-" + std::to_string(below(5)) + ".error";
        if (below(2) == 0) {
          cite.timestamp = Timestamp::from_epoch_seconds(
              Timestamp{2025, 9, 17, 0, 0, 0}.epoch_seconds() + below(86400));
        }
        if (below(2) == 0) cite.callsite = "f.cc:" + std::to_string(below(900));
        cite.content = "content " + std::to_string(below(1000));
        d.cited_lines.push_back(std::move(cite));
      }
      const Diagnosis again = parse_response(render_diagnosis(d));
      CHECK(again.conclusion == d.conclusion);
      CHECK(again.investigation_steps == d.investigation_steps);
      CHECK(again.cited_lines == d.cited_lines);
      CHECK(again.has_citations_section == d.has_citations_section);
      CHECK(again.parse_warnings.empty());
    }
  }
}

TEST_CASE("normalize_response strips trailing space and settles on one newline") {
  CHECK(normalize_response("a  \nb\t\n\n\n") == "a\nb\n");
  CHECK(normalize_response("") == "");
  CHECK(normalize_response("x") == "x\n");
}
