#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "condcov/config.hpp"

using namespace condcov;
using Catch::Approx;

TEST_CASE("toml subset parsing", "[config]") {
    std::istringstream in(R"(
# comment line
seed = 4242
size = 0.05            # trailing comment
stats = ["T", "T~"]
sides = ["two", "two"]
n = [100, 250]
replications = 5000
null_replications = 20000

[[alternatives]]
family = "student_t"
rho = 0.3
nu = 3

[[alternatives]]
family = "frank"
theta = 9.0
)");
    const toml::Table t = toml::parse(in);
    CHECK(t.at("seed").number() == 4242.0);
    CHECK(t.at("size").number() == Approx(0.05));
    CHECK(t.at("stats").array()[1].str() == "T~");
    CHECK(t.table_arrays.at("alternatives").size() == 2);
    CHECK(t.table_arrays.at("alternatives")[1].at("theta").number() == Approx(9.0));
}

TEST_CASE("toml subset rejects malformed input", "[config]") {
    std::istringstream bad1("key 17\n");
    CHECK_THROWS_AS(toml::parse(bad1), ConfigError);
    std::istringstream bad2("s = \"unterminated\n");
    CHECK_THROWS_AS(toml::parse(bad2), ConfigError);
    std::istringstream bad3("[section]\nx = 1\n");
    CHECK_THROWS_AS(toml::parse(bad3), ConfigError);
    std::istringstream bad4("x = what\n");
    CHECK_THROWS_AS(toml::parse(bad4), ConfigError);
}

namespace {
std::string write_temp(const std::string& name, const std::string& text) {
    const auto p = std::filesystem::temp_directory_path() / name;
    std::ofstream out(p, std::ios::trunc);
    out << text;
    return p.string();
}
}  // namespace

TEST_CASE("power config from toml and json agree", "[config]") {
    const std::string toml_path = write_temp("cfg.toml", R"(
seed = 11
size = 0.05
stats = ["T", "BHEP"]
n = [100]
replications = 2000
null_replications = 4000

[[alternatives]]
family = "student_t"
rho = 0.0
nu = 3
)");
    const PowerConfig a = load_power_config(toml_path);
    REQUIRE(a.stats.size() == 2);
    CHECK(a.stats[0].stat == Statistic::T);
    CHECK(a.stats[0].side == RejectionSide::TwoSided);
    CHECK(a.stats[1].stat == Statistic::BHEP);
    CHECK(a.stats[1].side == RejectionSide::Right);  // benchmark default
    CHECK(a.n_grid == std::vector<std::size_t>{100});
    REQUIRE(a.alternatives.size() == 1);
    CHECK(a.alternatives[0].family == CopulaFamily::StudentT);
    CHECK(a.alternatives[0].nu == Approx(3.0));
    CHECK(a.seed == 11);

    const std::string json_path = write_temp("cfg.json", R"({
      "seed": 11, "size": 0.05,
      "stats": [{"stat": "T", "side": "two"}, {"stat": "BHEP", "side": "right"}],
      "n": [100],
      "replications": 2000, "null_replications": 4000,
      "alternatives": [{"family": "student_t", "rho": 0.0, "nu": 3}]
    })");
    const PowerConfig b = load_power_config(json_path);
    CHECK(a.canonical == b.canonical);
}

TEST_CASE("config validation errors", "[config]") {
    const std::string no_stats = write_temp("bad1.toml", "n = [50]\n[[alternatives]]\nfamily = \"frank\"\ntheta = 2.0\n");
    CHECK_THROWS_AS(load_power_config(no_stats), ConfigError);

    const std::string bad_side = write_temp("bad2.toml",
                                            "stats = [\"T\"]\nsides = [\"up\"]\nn = [50]\n"
                                            "[[alternatives]]\nfamily = \"frank\"\ntheta = 2.0\n");
    CHECK_THROWS_AS(load_power_config(bad_side), ConfigError);

    const std::string len_mismatch = write_temp("bad3.toml",
                                                "stats = [\"T\", \"L\"]\nsides = [\"two\"]\nn = [50]\n"
                                                "[[alternatives]]\nfamily = \"frank\"\ntheta = 2.0\n");
    CHECK_THROWS_AS(load_power_config(len_mismatch), ConfigError);

    const std::string no_alt = write_temp("bad4.toml", "stats = [\"T\"]\nn = [50]\n");
    CHECK_THROWS_AS(load_power_config(no_alt), ConfigError);

    const std::string bad_param = write_temp("bad5.toml",
                                             "stats = [\"T\"]\nn = [50]\n"
                                             "[[alternatives]]\nfamily = \"gumbel\"\ntheta = 0.5\n");
    CHECK_THROWS_AS(load_power_config(bad_param), std::invalid_argument);
}
