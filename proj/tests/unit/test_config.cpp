#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "sprout/config.hpp"
#include "sprout/csv.hpp"
#include "sprout/error.hpp"
#include "support.hpp"

using namespace sprout;

namespace {

/// key -> value from "key = value" lines.
std::map<std::string, std::string> parse_pairs(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

/// key -> default from the "| `key` | `default` | ... |" rows of docs/config.md.
std::map<std::string, std::string> documented_defaults() {
  std::istringstream in(read_file(std::string(SPROUT_SOURCE_DIR) + "/docs/config.md"));
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("| `", 0) != 0) continue;
    const std::size_t k0 = 3, k1 = line.find('`', k0);
    const auto v0 = line.find('`', k1 + 1) + 1, v1 = line.find('`', v0);
    out[line.substr(k0, k1 - k0)] = line.substr(v0, v1 - v0);
  }
  return out;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults match the training recipe") {
    const Config c;
    CHECK(c.seed == 42);
    CHECK(c.train.epochs == 40);
    CHECK(c.train.batch_size == 32);
    CHECK(c.train.initial_lr == 0.001);
    CHECK(c.train.lambda_l2 == 0.01);
    CHECK(c.train.callbacks.early_stop_patience == 10);
    CHECK(c.train.callbacks.lr_patience == 5);
    CHECK(c.train.callbacks.lr_factor == 0.5);
    CHECK(c.train.callbacks.min_lr == 1e-6);
    CHECK(c.image_size == 224);
    CHECK(c.freeze_prefix == 80);
    CHECK(c.augment.rotation_range_deg == 20.0);
    CHECK(c.augment.zoom_range == 0.2);
    CHECK(c.head.units == std::vector<std::size_t>{256, 128});
    CHECK(c.head.dropout == 0.25);
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("documented defaults equal the built-in ones") {
    const auto doc = documented_defaults();
    const auto actual = parse_pairs(Config{}.to_text());
    CHECK(doc.size() == config_keys().size());
    for (const auto& key : config_keys()) {
      CAPTURE(key);
      REQUIRE(doc.count(key) == 1);
      CHECK(doc.at(key) == actual.at(key));
    }
  }

  TEST_CASE("text round trip") {
    Config c;
    c.merge_text("# comment\nepochs = 3\n\nalpha=0.25\ndense_units = 64, 32\nshear_unit = radians\n");
    CHECK(c.train.epochs == 3);
    CHECK(c.alpha == 0.25);
    CHECK(c.head.units == std::vector<std::size_t>{64, 32});
    CHECK(c.augment.shear_unit == ShearUnit::radians);
    Config d;
    d.merge_text(c.to_text());
    CHECK(d.to_text() == c.to_text());
    CHECK(parse_pairs(c.to_text()).size() == config_keys().size());
  }

  TEST_CASE("errors carry the origin and line") {
    Config c;
    try {
      c.merge_text("epochs = 2\nbogus = 1\n", "run.cfg");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("run.cfg:2") != std::string::npos);
    }
    CHECK_THROWS_AS(c.set("epochs", "many"), FormatError);
    CHECK_THROWS_AS(c.set("stratified", "maybe"), FormatError);
    CHECK_THROWS_AS(c.merge_text("no equals sign\n"), FormatError);
  }

  TEST_CASE("validation catches inconsistent settings") {
    Config c;
    c.split = {0.8, 0.1, 0.2};
    CHECK_THROWS_AS(c.validate(), ValueError);
    c = Config{};
    c.alpha = 0.3;
    CHECK_THROWS_AS(c.validate(), ValueError);
    c = Config{};
    c.image_size = 100;
    CHECK_THROWS_AS(c.validate(), ValueError);
    c = Config{};
    c.augment.zoom_range = 1.5;
    CHECK_THROWS_AS(c.validate(), ValueError);
  }

  TEST_CASE("model and split options follow the config") {
    Config c;
    c.set("alpha", "0.5");
    c.set("image_size", "96");
    c.set("freeze_prefix", "10");
    c.set("seed", "7");
    c.set("stratified", "false");
    const auto m = c.model_options();
    CHECK(m.alpha == 0.5);
    CHECK(m.input_size == 96);
    CHECK(m.freeze_prefix == 10);
    CHECK(c.split_spec().seed == 7);
    CHECK_FALSE(c.split_spec().stratified);
  }

  TEST_CASE("merge_file reports a missing file") {
    test::TempDir dir;
    Config c;
    CHECK_THROWS_AS(c.merge_file(dir / "none.cfg"), IoError);
    std::ofstream(dir / "a.cfg") << "batch_size = 4\n";
    c.merge_file(dir / "a.cfg");
    CHECK(c.train.batch_size == 4);
  }
}
