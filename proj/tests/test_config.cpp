#include <filesystem>

#include "cslt/config.hpp"
#include "doctest.h"

using namespace cslt;
namespace fs = std::filesystem;

TEST_CASE("config: file parse, defaults, precedence") {
  fs::path dir = fs::temp_directory_path() / "cslt_config";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_text_file(dir / "c.ini",
                  "# comment\n"
                  "[train]\n"
                  "lr = 0.0005\n"
                  "epochs = 3\n"
                  "\n"
                  "[data]\n"
                  "manifest = /tmp/m.jsonl\n");

  auto cfg = Config::from_file(dir / "c.ini");
  CHECK(cfg.get_double("train", "lr", 1e-4) == doctest::Approx(5e-4));
  CHECK(cfg.get_int("train", "epochs", 10) == 3);
  // default materialization
  CHECK(cfg.get_int("train", "warmup_epochs", 5) == 5);
  CHECK(cfg.has("train", "warmup_epochs"));

  // flag overrides beat the file
  cfg.set_override("train.lr", "0.001");
  CHECK(cfg.get_double("train", "lr", 1e-4) == doctest::Approx(1e-3));

  CHECK(cfg.require_string("data", "manifest") == "/tmp/m.jsonl");
  CHECK_THROWS_AS(cfg.require_string("data", "nope"), ConfigError);
  CHECK_THROWS_AS(cfg.get_int("data", "manifest", 0), ConfigError);
}

TEST_CASE("config: snapshot round-trip reproduces resolved values") {
  Config cfg;
  cfg.set("train", "lr", "0.0001");
  cfg.get_int("train", "epochs", 10);
  cfg.get_bool("augment", "enabled", true);

  fs::path snap = fs::temp_directory_path() / "cslt_config" / "snapshot.ini";
  cfg.write_snapshot(snap);
  auto reloaded = Config::from_file(snap);
  CHECK(reloaded.get_double("train", "lr", 0.0) == doctest::Approx(1e-4));
  CHECK(reloaded.get_int("train", "epochs", 0) == 10);
  CHECK(reloaded.get_bool("augment", "enabled", false) == true);
  CHECK(reloaded.to_ini() == cfg.to_ini());
}

TEST_CASE("config: malformed input raises ConfigError") {
  fs::path dir = fs::temp_directory_path() / "cslt_config";
  fs::create_directories(dir);
  write_text_file(dir / "bad1.ini", "[train\nlr = 1\n");
  CHECK_THROWS_AS(Config::from_file(dir / "bad1.ini"), ConfigError);
  write_text_file(dir / "bad2.ini", "lr = 1\n");
  CHECK_THROWS_AS(Config::from_file(dir / "bad2.ini"), ConfigError);
  write_text_file(dir / "bad3.ini", "[train]\njust some text\n");
  CHECK_THROWS_AS(Config::from_file(dir / "bad3.ini"), ConfigError);

  Config cfg;
  CHECK_THROWS_AS(cfg.set_override("nodot", "1"), ConfigError);
}
