#include <doctest.h>

#include <cstdio>
#include <sstream>

#include "sprout/commands.hpp"
#include "sprout/csv.hpp"
#include "support.hpp"
#include "oracles/param_oracle.hpp"

using namespace sprout;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

/// Runs the installed binary through the shell; returns the exit status.
int shell(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = std::string(SPROUT_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::string text;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) text.append(buf, n);
  const int status = ::pclose(p);
  if (output) *output = text;
  return WEXITSTATUS(status);
}

std::string last_line_with(const std::string& text, const std::string& needle) {
  std::istringstream in(text);
  std::string line, hit;
  while (std::getline(in, line))
    if (line.find(needle) != std::string::npos) hit = line;
  return hit;
}

const std::vector<std::string> kMicro{"--alpha", "0.25", "--image-size", "32", "--deterministic",
                                      "--batch-size", "16"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("thousands grouping") {
    CHECK(group_thousands(0) == "0");
    CHECK(group_thousands(999) == "999");
    CHECK(group_thousands(1000) == "1,000");
    CHECK(group_thousands(3525063) == "3,525,063");
  }

  TEST_CASE("summary prints the default totals") {
    const auto r = cli({"summary"});
    CHECK(r.code == 0);
    CHECK(r.out.find("3,525,063 / 1,358,087 / 2,166,976") != std::string::npos);
    CHECK(r.out.find("b12.pw.relu") != std::string::npos);
  }

  TEST_CASE("summary with no frozen layers") {
    const auto r = cli({"summary", "--freeze", "0"});
    CHECK(r.code == 0);
    CHECK(last_line_with(r.out, "total / trainable / non_trainable").find("/ 21,888") !=
          std::string::npos);
  }

  TEST_CASE("summary at quarter width agrees with the formula oracle") {
    const auto r = cli({"summary", "--alpha", "0.25", "--classes", "7", "--freeze", "0"});
    REQUIRE(r.code == 0);
    const auto o = test::oracle_counts(0.25, 7, 0);
    const std::string expect = group_thousands(o.total) + " / " + group_thousands(o.trainable) +
                               " / " + group_thousands(o.non_trainable);
    CHECK(r.out.find(expect) != std::string::npos);
  }

  TEST_CASE("summary CSV is the enumeration table") {
    const auto r = cli({"summary", "--csv"});
    CHECK(r.code == 0);
    CHECK(r.out == read_file(std::string(SPROUT_SOURCE_DIR) + "/docs/enumeration.csv"));
  }

  TEST_CASE("print-config reflects overrides") {
    const auto r = cli({"train", "--epochs", "3", "--set", "lr_patience=2", "--print-config"});
    CHECK(r.code == 0);
    CHECK(r.out.find("epochs = 3\n") != std::string::npos);
    CHECK(r.out.find("lr_patience = 2\n") != std::string::npos);
    CHECK(r.out.find("seed = 42\n") != std::string::npos);
  }

  TEST_CASE("usage errors exit with 2") {
    test::TempDir dir;
    const auto missing = (dir / "nope").string();
    const auto r = cli({"train", "--data-dir", missing});
    CHECK(r.code == 2);
    CHECK(r.err.find(missing) != std::string::npos);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"summary", "--alpha", "x"}).code == 2);
    CHECK(cli({"summary", "--set", "nokey"}).code == 2);
    CHECK(cli({"eval"}).code == 2);
  }

  TEST_CASE("binary exit codes") {
    std::string text;
    CHECK(shell("summary", &text) == 0);
    CHECK(text.find("3,525,063") != std::string::npos);
    CHECK(shell("train --data-dir /definitely/not/here", &text) == 2);
    CHECK(text.find("/definitely/not/here") != std::string::npos);
    CHECK(shell("--help") == 0);
  }

  TEST_CASE("augment preview writes images") {
    test::TempDir dir;
    write_png(dir / "src.png", test::synthetic_image(1, 0, 40));
    const auto r = cli({"augment-preview", "--image", (dir / "src.png").string(), "--count", "3",
                        "--image-size", "32", "--out", (dir / "prev").string()});
    CHECK(r.code == 0);
    for (int i = 0; i < 3; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "preview_%03d.png", i);
      CHECK(fs::exists(dir / "prev" / name));
    }
  }

  TEST_CASE("micro pipeline: train, eval, predict") {
    test::TempDir dir;
    const auto classes = test::write_image_tree(dir / "data", 7, 20, 40);
    const std::string data = (dir / "data").string(), out = (dir / "run").string();
    const auto r = cli(with({"train", "--data-dir", data, "--out", out, "--epochs", "2"}, kMicro));
    INFO(r.err);
    REQUIRE(r.code == 0);
    for (const char* f : {"split.csv", "history.csv", "best.ckpt", "config.txt", "confusion.csv",
                          "report.csv", "confusion.png"})
      CHECK(fs::exists(dir / "run" / f));
    CHECK(parse_csv(read_file(dir / "run/history.csv")).size() == 3);
    const auto split = parse_csv(read_file(dir / "run/split.csv"));
    CHECK(split.size() == 141);

    SUBCASE("eval on the test subset uses only test rows") {
      const auto e = cli({"eval", "--weights", out + "/best.ckpt", "--data-dir", data, "--split",
                          out + "/split.csv", "--subset", "test", "--out",
                          (dir / "eval").string()});
      INFO(e.err);
      REQUIRE(e.code == 0);
      const auto cm = parse_csv(read_file(dir / "eval/confusion.csv"));
      std::size_t total = 0;
      for (std::size_t i = 1; i < cm.size(); ++i)
        for (std::size_t j = 1; j < cm[i].size(); ++j) total += std::stoul(cm[i][j]);
      std::size_t test_rows = 0;
      for (std::size_t i = 1; i < split.size(); ++i) test_rows += split[i][2] == "test";
      CHECK(total == test_rows);
      CHECK(e.out.find("accuracy: ") != std::string::npos);
    }

    SUBCASE("eval on an empty subset") {
      const auto empty = dir / "empty_split.csv";
      write_file_atomic(empty, "path,class,subset\n" + split[1][0] + "," + split[1][1] + ",train\n");
      const auto e = cli({"eval", "--weights", out + "/best.ckpt", "--data-dir", data, "--split",
                          empty.string(), "--subset", "test"});
      CHECK(e.code == 2);
      CHECK(e.err.find("no samples") != std::string::npos);
    }

    SUBCASE("predict prints one row per image with probabilities summing to one") {
      const std::string img = data + "/" + classes[3] + "/img_100.png";
      const auto p = cli({"predict", "--weights", out + "/best.ckpt", "--probs", img});
      REQUIRE(p.code == 0);
      const auto rows = parse_csv(p.out);
      REQUIRE(rows.size() == 1);
      CHECK(rows[0][0] == img);
      REQUIRE(rows[0].size() == 3 + 7);
      double s = 0.0;
      for (std::size_t j = 3; j < rows[0].size(); ++j) s += std::stod(rows[0][j]);
      CHECK(std::abs(s - 1.0) <= 4e-6);
    }

    SUBCASE("predict reports a bad file and continues") {
      write_file_atomic(dir / "bad.png", "not a png");
      const std::string good = data + "/" + classes[0] + "/img_101.png";
      const auto p =
          cli({"predict", "--weights", out + "/best.ckpt", (dir / "bad.png").string(), good});
      CHECK(p.code == 1);
      CHECK(parse_csv(p.out).size() == 1);
      CHECK(p.err.find("bad.png") != std::string::npos);
    }

    SUBCASE("predict without images is a usage error") {
      CHECK(cli({"predict", "--weights", out + "/best.ckpt"}).code == 2);
    }

    SUBCASE("a rerun with the same seed is bit-identical") {
      const std::string again = (dir / "again").string();
      REQUIRE(cli(with({"train", "--data-dir", data, "--out", again, "--epochs", "2"}, kMicro))
                  .code == 0);
      for (const char* f : {"history.csv", "confusion.csv", "best.ckpt", "split.csv"})
        CHECK_MESSAGE(read_file(fs::path(out) / f) == read_file(fs::path(again) / f), f);
    }
  }

  TEST_CASE("empty class directory is reported") {
    test::TempDir dir;
    fs::create_directories(dir / "data/a");
    const auto r = cli({"train", "--data-dir", (dir / "data").string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("no images") != std::string::npos);
  }
}
