#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "cardioforge/config.hpp"
#include "cardioforge/errors.hpp"
#include "cardioforge/version.hpp"

using namespace cardioforge;
namespace fs = std::filesystem;

TEST_CASE("key-value parsing, comments, trimming") {
    const KvConfig cfg = KvConfig::from_string(
        "# a comment\n"
        "regime = sim_dcgan\n"
        "iterations=250   # trailing comment\n"
        "  lr  =  0.0002\n"
        "\n"
        "flag = true\n");
    CHECK(cfg.get_str("regime", "") == "sim_dcgan");
    CHECK(cfg.get_int("iterations", 0) == 250);
    CHECK(cfg.get_double("lr", 0) == doctest::Approx(0.0002));
    CHECK(cfg.get_bool("flag", false));
    CHECK(cfg.get_int("absent", 42) == 42);
}

TEST_CASE("malformed lines and values are input errors") {
    CHECK_THROWS_AS(KvConfig::from_string("value-without-equals\n"), InputError);
    const KvConfig cfg = KvConfig::from_string("n = twelve\n");
    CHECK_THROWS_AS(cfg.get_int("n", 0), InputError);
    CHECK_THROWS_AS(cfg.get_double("n", 0), InputError);
    CHECK_THROWS_AS(cfg.get_bool("n", false), InputError);
}

TEST_CASE("overrides replace file values") {
    KvConfig cfg = KvConfig::from_string("a = 1\nb = 2\n");
    cfg.apply_override("b=7");
    cfg.apply_override("c = 9");
    CHECK(cfg.get_int("a", 0) == 1);
    CHECK(cfg.get_int("b", 0) == 7);
    CHECK(cfg.get_int("c", 0) == 9);
    CHECK_THROWS_AS(cfg.apply_override("no-equals"), InputError);
}

TEST_CASE("serialisation is sorted and parses back") {
    KvConfig cfg;
    cfg.set("zeta", "1");
    cfg.set("alpha", "2");
    const std::string text = cfg.serialize();
    CHECK(text.find("alpha") < text.find("zeta"));
    const KvConfig back = KvConfig::from_string(text);
    CHECK(back.get_int("zeta", 0) == 1);
    CHECK(back.get_int("alpha", 0) == 2);
}

TEST_CASE("config file save/load round trip") {
    const auto path = fs::temp_directory_path() / "cf_config_test.cfg";
    KvConfig cfg;
    cfg.set("regime", "vgan");
    cfg.set_double("scale", 0.25);
    cfg.save(path.string());
    const KvConfig r = KvConfig::load(path.string());
    CHECK(r.get_str("regime", "") == "vgan");
    CHECK(r.get_double("scale", 0) == 0.25);
    CHECK_THROWS_AS(KvConfig::load("/nonexistent/path.cfg"), InputError);
    fs::remove(path);
}

TEST_CASE("seed precedence: flag, config, environment, zero") {
    KvConfig cfg;
    cfg.values["seed"] = "5";
    unsetenv("CARDIOFORGE_SEED");
    CHECK(resolve_seed(std::uint64_t{9}, &cfg) == 9);
    CHECK(resolve_seed(std::nullopt, &cfg) == 5);
    setenv("CARDIOFORGE_SEED", "17", 1);
    KvConfig empty;
    CHECK(resolve_seed(std::nullopt, &empty) == 17);
    CHECK(resolve_seed(std::nullopt, nullptr) == 17);
    setenv("CARDIOFORGE_SEED", "junk", 1);
    CHECK_THROWS_AS(resolve_seed(std::nullopt, nullptr), InputError);
    unsetenv("CARDIOFORGE_SEED");
    CHECK(resolve_seed(std::nullopt, nullptr) == 0);
}

TEST_CASE("run manifest is written atomically with the expected keys") {
    const auto dir = fs::temp_directory_path() / "cf_manifest_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    RunManifest m;
    m.command = "simulate";
    m.config_path = "none";
    m.seed = 12;
    m.inputs = {"a.txt", "b.txt"};
    m.outputs = {"beats.csv"};
    m.version = kVersion;
    m.duration_seconds = 0.5;
    m.write(dir.string());
    CHECK(fs::exists(dir / "manifest.txt"));
    CHECK(!fs::exists(dir / ".manifest.tmp"));
    const KvConfig kv = KvConfig::load((dir / "manifest.txt").string());
    CHECK(kv.get_str("command", "") == "simulate");
    CHECK(kv.get_u64("seed", 0) == 12);
    CHECK(kv.get_str("inputs", "") == "a.txt;b.txt");
    CHECK(kv.get_str("version", "") == kVersion);
    fs::remove_all(dir);
}
