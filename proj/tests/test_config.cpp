#include <doctest.h>

#include "bevf/config.hpp"

using namespace bevf;

TEST_CASE("defaults validate and round-trip through text") {
  Config cfg;
  CHECK_NOTHROW(cfg.validate());
  const auto text = dump_config(cfg);
  const auto back = parse_config(text);
  CHECK(dump_config(back) == text);
  CHECK(Config::keys().size() == 25);
}

TEST_CASE("parse key=value with comments and whitespace") {
  const auto cfg = parse_config(
      "# desk scale\n"
      "grid.width = 128\n"
      "grid.height=16\n"
      "\n"
      "net.depth=4\n"
      "net.head = clipped_relu\n"
      "train.lr=1e-3\n"
      "stack.d=8\n");
  CHECK(cfg.grid.width_px == 128);
  CHECK(cfg.grid.height_px == 16);
  CHECK(cfg.net.depth == 4);
  CHECK(cfg.net.head == Head::clipped_relu);
  CHECK(cfg.train.lr == 1e-3);
  CHECK(cfg.network_spec().in_channels == 8);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("later settings override earlier ones") {
  auto cfg = parse_config("train.epochs=2\n");
  cfg.set("train.epochs", "5");
  CHECK(cfg.train.epochs == 5);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("nope=1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("grid.width\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("grid.width=12x\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("train.lr=nan\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("net.head=softmax\n"), std::invalid_argument);
  auto cfg = parse_config("grid.width=100\n");
  CHECK_THROWS(cfg.validate());  // not a multiple of 2^6
}
