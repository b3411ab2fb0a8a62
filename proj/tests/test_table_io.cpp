#include <limits>
#include <sstream>

#include "doctest.h"
#include "volcast/table_io.hpp"

using namespace volcast;

TEST_CASE("format_double follows the shortest round-trip layout") {
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(io::format_double(2.0) == "2.0");
  CHECK(io::format_double(-0.25) == "-0.25");
  CHECK(io::format_double(1e-05) == "1e-05");
  CHECK(io::format_double(0.0001) == "0.0001");
  CHECK(io::format_double(123456789.0) == "123456789.0");
  CHECK(io::format_double(1e16) == "1e+16");
  CHECK(io::format_double(1.5e16) == "1.5e+16");
  CHECK(io::format_double(1234567890123456.0) == "1234567890123456.0");
  CHECK(io::format_double(0.0) == "0.0");
  CHECK(io::format_double(-0.0) == "-0.0");
  CHECK(io::format_double(1.0 / 3.0) == "0.3333333333333333");
  CHECK(io::format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(io::format_double(5e-324) == "5e-324");
}

TEST_CASE("CSV quoting round trip") {
  std::ostringstream os;
  io::write_csv_row(os, {"plain", "a,b", "say \"hi\"", "two\nlines", ""});
  io::write_csv_row(os, {"x"});
  const auto rows = io::parse_csv(os.str());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == io::CsvRow{"plain", "a,b", "say \"hi\"", "two\nlines", ""});
  CHECK(rows[1] == io::CsvRow{"x"});
  CHECK(io::parse_csv("a,b\r\nc,d\r\n") == std::vector<io::CsvRow>{{"a", "b"}, {"c", "d"}});
  CHECK_THROWS(io::parse_csv("\"open"));
}

TEST_CASE("UTC timestamps") {
  CHECK(io::parse_utc("1970-01-01T00:00:00Z") == 0);
  CHECK(io::parse_utc("2019-03-01") == 1551398400);
  CHECK(io::format_utc(1551398400 + 3600 + 61) == "2019-03-01T01:01:01Z");
  CHECK(io::format_date(1551398400 + 86399) == "2019-03-01");
  CHECK(io::parse_utc(io::format_utc(-86400 * 400 + 5)) == -86400 * 400 + 5);
  CHECK_THROWS(io::parse_utc("2019-02-30"));
  CHECK_THROWS(io::parse_utc("2019-03-01T10:00:00+02:00"));
}

TEST_CASE("strict field parsing") {
  CHECK(io::parse_double("1.5") == 1.5);
  CHECK_THROWS(io::parse_double("1.5x"));
  CHECK_THROWS(io::parse_double(""));
  CHECK(io::parse_int("-42") == -42);
  CHECK_THROWS(io::parse_int("4.2"));
  CHECK(io::parse_bool("true"));
  CHECK_FALSE(io::parse_bool("0"));
  CHECK_THROWS(io::parse_bool("yes"));
}
