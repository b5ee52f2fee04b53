#include <filesystem>
#include <fstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "smdiag/io.hpp"

using namespace smdiag;

TEST_CASE("config parsing skips comments and blank lines") {
  Config c = Config::from_string(
      "# leading comment\n"
      "\n"
      "alpha = 0.5   # trailing comment\n"
      "  steps=1000\n"
      "name = canonical\n");
  REQUIRE(c.get_real("alpha") == 0.5);
  REQUIRE(c.get_int("steps") == 1000);
  REQUIRE(c.get_str("name") == "canonical");
  c.require_all_consumed();
}

TEST_CASE("config rejects malformed input") {
  REQUIRE_THROWS_AS(Config::from_string("alpha 0.5\n"), std::invalid_argument);
  REQUIRE_THROWS_AS(Config::from_string("a = 1\na = 2\n"), std::invalid_argument);
  REQUIRE_THROWS_AS(Config::from_string("bad key = 1\n"), std::invalid_argument);
  REQUIRE_THROWS_AS(Config::from_string("wh@t = 1\n"), std::invalid_argument);
}

TEST_CASE("typed getters validate and fall back") {
  Config c = Config::from_string("n = 12\nx = 2.5\nword = tent\nfrac = 3.5\n");
  REQUIRE(c.get_int("n") == 12);
  REQUIRE(c.get_real("x") == 2.5);
  REQUIRE(c.get_int("missing", 7) == 7);
  REQUIRE(c.get_real("absent", 1.25) == 1.25);
  REQUIRE(c.get_str("nothere", "dflt") == "dflt");
  REQUIRE_THROWS_AS(c.get_int("frac"), std::invalid_argument);
  REQUIRE_THROWS_AS(c.get_real("word"), std::invalid_argument);
  REQUIRE_THROWS_AS(c.get_real("missing"), std::invalid_argument);
}

TEST_CASE("unread keys are reported by name") {
  Config c = Config::from_string("used = 1\ntol.spelled_wrong = 2\n");
  REQUIRE(c.get_int("used") == 1);
  bool threw = false;
  try {
    c.require_all_consumed();
  } catch (const std::invalid_argument& e) {
    threw = true;
    REQUIRE(std::string(e.what()).find("tol.spelled_wrong") != std::string::npos);
  }
  REQUIRE(threw);
  REQUIRE(c.get_int("tol.spelled_wrong") == 2);
  c.require_all_consumed();
}

TEST_CASE("list values parse comma separated reals") {
  Config c = Config::from_string("deltas = 0.04, 0.02,0.01\nempty =\n");
  std::vector<double> d = c.get_reals("deltas");
  REQUIRE(d == std::vector<double>{0.04, 0.02, 0.01});
  REQUIRE_THROWS_AS(c.get_reals("empty"), std::invalid_argument);
}

TEST_CASE("config fingerprint ignores line order but not content") {
  Config a = Config::from_string("a = 1\nb = 2\n");
  Config b = Config::from_string("b = 2\na = 1\n");
  Config d = Config::from_string("a = 1\nb = 3\n");
  REQUIRE(a.hash() == b.hash());
  REQUIRE(a.hash() != d.hash());
  Config e = a;
  e.set("c", "4");
  REQUIRE(e.hash() != a.hash());
}

TEST_CASE("config reads from a file") {
  auto path = std::filesystem::temp_directory_path() / "smdiag_cfg_test.cfg";
  {
    std::ofstream out(path);
    out << "seed = 99\n";
  }
  Config c = Config::from_file(path.string());
  REQUIRE(c.get_int("seed") == 99);
  std::filesystem::remove(path);
  REQUIRE_THROWS(Config::from_file((path.parent_path() / "no_such.cfg").string()));
}

TEST_CASE("numeric cells round-trip doubles exactly") {
  REQUIRE(csv_cell(1.0) == "1");
  REQUIRE(csv_cell(0.1) == "0.10000000000000001");
  REQUIRE(std::stod(csv_cell(1.0 / 3.0)) == 1.0 / 3.0);
  REQUIRE(std::stod(csv_cell(-2.718281828459045e-10)) == -2.718281828459045e-10);
  REQUIRE(csv_cell(static_cast<std::size_t>(42)) == "42");
  REQUIRE(csv_cell(static_cast<long long>(-7)) == "-7");
}

TEST_CASE("csv writer emits stable bytes") {
  auto path = std::filesystem::temp_directory_path() / "smdiag_csv_test.csv";
  {
    CsvWriter w(path, "k,value");
    w.row(static_cast<std::size_t>(0), 0.5);
    w.row(static_cast<std::size_t>(1), -1.0 / 3.0);
    w.line("verdict,ok");
  }
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  REQUIRE(text ==
          "k,value\n"
          "0,0.5\n"
          "1,-0.33333333333333331\n"
          "verdict,ok\n");
  std::filesystem::remove(path);
}
