#include <stdexcept>

#include "doctest.h"
#include "hetsim/config.h"

using namespace hetsim;

TEST_CASE("config parses keys, comments, and blank lines") {
  ConfigMap cfg = ConfigMap::parse_string(
      "# header\n"
      "a.b = 12\n"
      "\n"
      "  c = hello world  \n"
      "d.e-f = -3.5  # trailing note\n");
  CHECK(cfg.get_int("a.b") == 12);
  CHECK(cfg.get_str("c") == "hello world");
  CHECK(cfg.get_real("d.e-f") == -3.5);
  CHECK(cfg.keys().size() == 3);
}

TEST_CASE("config rejects malformed lines and keys") {
  CHECK_THROWS_AS(ConfigMap::parse_string("no equals sign\n"), std::runtime_error);
  CHECK_THROWS_AS(ConfigMap::parse_string(".leading = 1\n"), std::runtime_error);
  CHECK_THROWS_AS(ConfigMap::parse_string("trailing. = 1\n"), std::runtime_error);
  CHECK_THROWS_AS(ConfigMap::parse_string("sp ace = 1\n"), std::runtime_error);
  CHECK_THROWS_AS(ConfigMap::parse_string("empty =\n"), std::runtime_error);
}

TEST_CASE("typed getters convert or throw") {
  ConfigMap cfg = ConfigMap::parse_string("n = 42\nx = 2.5\nflag = true\ns = abc\n");
  CHECK(cfg.get_int("n") == 42);
  CHECK(cfg.get_u64("n") == 42);
  CHECK(cfg.get_real("x") == 2.5);
  CHECK(cfg.get_bool("flag"));
  CHECK(cfg.get_str("s") == "abc");
  CHECK_THROWS_AS(cfg.get_int("s"), std::runtime_error);
  CHECK_THROWS_AS(cfg.get_int("missing"), std::runtime_error);
  CHECK(cfg.get_int("missing", 7) == 7);
  CHECK(cfg.get_real("missing", 1.5) == 1.5);
  CHECK(cfg.get_bool("missing", true));
  CHECK(cfg.get_str("missing", "dflt") == "dflt");
}

TEST_CASE("serialize is sorted and round-trips verbatim") {
  ConfigMap cfg = ConfigMap::parse_string("b = 2\na = 1e9\nc = 0.30000000000000004\n");
  std::string text = cfg.serialize();
  CHECK(text == "a = 1e9\nb = 2\nc = 0.30000000000000004\n");
  ConfigMap again = ConfigMap::parse_string(text);
  CHECK(cfg == again);
  CHECK(again.serialize() == text);
}

TEST_CASE("setters normalize and validate") {
  ConfigMap cfg;
  cfg.set_int("i", -5);
  cfg.set_u64("u", 1458176);
  cfg.set_real("r", 0.1);
  cfg.set_bool("b", false);
  cfg.set_str("s", "cc");
  CHECK(cfg.get_int("i") == -5);
  CHECK(cfg.get_u64("u") == 1458176);
  CHECK(cfg.get_real("r") == 0.1);
  CHECK_FALSE(cfg.get_bool("b"));
  CHECK_THROWS_AS(cfg.set_str("bad", "line\nbreak"), std::runtime_error);
  CHECK_THROWS_AS(cfg.set_str("bad", ""), std::runtime_error);
}

TEST_CASE("keys_with_prefix filters dotted groups") {
  ConfigMap cfg = ConfigMap::parse_string("arch.a = 1\narch.b = 2\nmodel.a = 3\n");
  auto arch_keys = cfg.keys_with_prefix("arch.");
  REQUIRE(arch_keys.size() == 2);
  CHECK(arch_keys[0] == "arch.a");
  CHECK(arch_keys[1] == "arch.b");
}

TEST_CASE("format_real emits the shortest exact form") {
  CHECK(format_real(1.0) == "1");
  CHECK(format_real(0.1) == "0.1");
  CHECK(format_real(-2.5) == "-2.5");
  CHECK(format_real(336e9) == "3.36e+11");
  // A value needing all 17 digits survives the round trip.
  double v = 0.30000000000000004;
  CHECK(ConfigMap::parse_string("x = " + format_real(v) + "\n").get_real("x") == v);
}
