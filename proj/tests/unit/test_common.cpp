#include <doctest.h>

#include <cmath>
#include <sstream>

#include "netshock/csv.hpp"
#include "netshock/dates.hpp"
#include "netshock/error.hpp"
#include "netshock/kv_config.hpp"

using namespace netshock;

TEST_SUITE("common") {
  TEST_CASE("dates parse and reject impossible days") {
    const auto d = parse_date("2013-05-02");
    CHECK(d == Date{2013, 5, 2});
    CHECK(to_string(d) == "2013-05-02");
    CHECK(parse_date("2016-02-29") == Date{2016, 2, 29});
    CHECK_THROWS_AS(parse_date("2015-02-29"), Error);
    CHECK_THROWS_AS(parse_date("2013-13-01"), Error);
    CHECK_THROWS_AS(parse_date("2013/05/02"), Error);
    CHECK(parse_year_month("2014-03") == YearMonth{2014, 3});
    CHECK(months_between({2013, 1}, {2016, 12}) == 48);
    CHECK(YearMonth{2013, 12}.plus(3) == YearMonth{2014, 3});
    CHECK(YearMonth{2014, 3}.quarter() == 1);
  }

  TEST_CASE("csv split handles quotes") {
    auto f = csv::split_line("a,\"b,c\",\"d\"\"e\",", 1);
    REQUIRE(f.size() == 4);
    CHECK(f[1] == "b,c");
    CHECK(f[2] == "d\"e");
    CHECK(f[3].empty());
  }

  TEST_CASE("csv reader enforces header") {
    std::istringstream good("x,y\n1,2\n\n3,4\n");
    csv::Reader r(good, {"x", "y"});
    std::vector<std::string> fields;
    int rows = 0;
    while (r.next(fields)) ++rows;
    CHECK(rows == 2);

    std::istringstream bad("y,x\n1,2\n");
    CHECK_THROWS_AS(csv::Reader(bad, {"x", "y"}), Error);
  }

  TEST_CASE("format_double round-trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0}) {
      const auto s = csv::format_double(v);
      CHECK(std::stod(s) == v);
    }
    CHECK(csv::format_double(2.0) == "2");
  }

  TEST_CASE("numeric field parsing") {
    CHECK(csv::parse_int("100000", 2, "weight") == 100000);
    CHECK_THROWS_AS(csv::parse_int("12x", 2, "weight"), ParseError);
    CHECK(csv::parse_double("-0.5", 2, "v") == doctest::Approx(-0.5));
    CHECK_THROWS_AS(csv::parse_double("", 2, "v"), ParseError);
  }

  TEST_CASE("key-value config") {
    auto cfg = KeyValueConfig::parse("# comment\nalpha = 0.5\nyears = 2013, 2014\nalpha=0.25\nflag = true\n");
    CHECK(cfg.get_double("alpha", 0) == doctest::Approx(0.25));
    CHECK(cfg.get_list("years") == std::vector<std::string>{"2013", "2014"});
    CHECK(cfg.get_bool("flag", false));
    CHECK(cfg.get_int("missing", 7) == 7);
    KeyValueConfig other;
    other.set("alpha", "0.9");
    cfg.merge(other);
    CHECK(cfg.get_double("alpha", 0) == doctest::Approx(0.9));
    CHECK(KeyValueConfig::parse(cfg.serialize()).values() == cfg.values());
  }
}
