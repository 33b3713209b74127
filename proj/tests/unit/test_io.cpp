#include "mwlab/io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>

using namespace mwlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("mwlab_io_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("atomic writes") {
  auto p = scratch("sub/a.txt");
  write_atomic(p, "hello\n");
  CHECK(read_file(p) == "hello\n");
  write_atomic(p, "again");
  CHECK(read_file(p) == "again");
  for (const auto& entry : fs::directory_iterator(p.parent_path()))
    CHECK(entry.path().filename().string().find(".tmp.") == std::string::npos);
  CHECK_THROWS_AS(read_file(scratch("missing")), ResourceError);
}

TEST_CASE("csv parsing") {
  auto rows = parse_csv("a,b,,c\r\n\n1,2,3,4\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].size() == 4);
  CHECK(rows[0][2].empty());
  CHECK(rows[1][3] == "4");
  CHECK(parse_csv("x\ty", '\t')[0][1] == "y");
}

TEST_CASE("weight dump round trip") {
  auto W = build_counterexample_weight(0.25, 12);
  std::string csv = weight_csv(W, 12);
  auto rows = read_weight_csv<double>(csv);
  CHECK(rows.size() == 8191);
  for (const auto& r : rows) {
    auto want = W.average(r.I);
    CHECK(r.W.m11 == want.m11);
    CHECK(r.W.m12 == want.m12);
    CHECK(r.W.m22 == want.m22);
    CHECK(r.alpha == W.alpha(r.I.level));
    CHECK(r.a == W.a(r.I));
  }
  CHECK_THROWS_AS(read_weight_csv<double>("x,y\n1,2\n"), DomainError);
  CHECK_THROWS_AS(read_weight_csv<double>("level,index,m11,m12,m22,alpha,beta,ax,ay\n0,0,1\n"), DomainError);

  set_extended_bits(128);
  auto We = build_counterexample_weight(Extended(0.25), 5);
  auto back = read_weight_csv<Extended>(weight_csv(We, 5));
  for (const auto& r : back) {
    auto want = We.average(r.I);
    CHECK(r.W.m11 == want.m11);
    CHECK(r.W.m12 == want.m12);
    CHECK(r.W.m22 == want.m22);
  }
}

TEST_CASE("dumps are identical across thread counts") {
  ::setenv("LAB_THREADS", "1", 1);
  auto W1 = build_counterexample_weight(0.25, 14);
  auto L1 = blowup_ledger(W1, 10, 10, 10);
  std::string a = weight_csv(W1, 10) + ledger_csv(L1);
  ::setenv("LAB_THREADS", "3", 1);
  auto W3 = build_counterexample_weight(0.25, 14);
  auto L3 = blowup_ledger(W3, 10, 10, 10);
  std::string b = weight_csv(W3, 10) + ledger_csv(L3);
  ::unsetenv("LAB_THREADS");
  CHECK(a == b);
}

TEST_CASE("ledger csv") {
  MartingaleWeight<double> W(0.25, 9, false);
  auto L = blowup_ledger(W, 8, 8, 2);
  auto rows = parse_csv(ledger_csv(L));
  REQUIRE(rows.size() == 1 + 7 + 6);
  CHECK(rows[0] == std::vector<std::string>{"level", "interval", "D", "F", "term", "cumulative"});
  CHECK(rows[1][1] == "0:0");
  CHECK(rows[8][1] == "3:*");
  CHECK(rows[8][2].empty());
  double last = std::stod(rows.back()[5]);
  CHECK(last == doctest::Approx(L.levels.back().cumulative).epsilon(1e-14));
}

TEST_CASE("max field and zonotope dumps") {
  MaxField<double> F{MaxOperator::McW, 2, 1, {1, 2, 3, 4}};
  auto rows = parse_csv(maxfield_tsv(F), '\t');
  REQUIRE(rows.size() == 4);
  CHECK(rows[2][0] == "2");
  CHECK(std::stod(rows[2][1]) == 3);
  auto side = maxfield_sidecar(F, 0.25);
  CHECK(side["operator"] == "Mc_W");
  CHECK(side["truncation"] == 1);
  CHECK(side["grid_level"] == 2);
  CHECK(side["l2_norm"].get<double>() == doctest::Approx(std::sqrt(7.5)));
  Zonotope<double> z{{Vec2<double>(1, 2), Vec2<double>(-0.5, 0)}};
  auto j = zonotope_json(z);
  CHECK(j.dump() == "[[1.0,2.0],[-0.5,0.0]]");
  CHECK(plot_tsv(std::vector<int>{0, 1}, std::vector<double>{0.5, 1.5}) == "0\t0.5\n1\t1.5\n");
}

TEST_CASE("summary schema") {
  json schema = json::parse(read_file(fs::path(MWLAB_SOURCE_DIR) / "docs" / "summary.schema.json"));
  json config = {{"epsilon", 0.25}, {"depth", 12},      {"backend", "double"}, {"bits", 128}, {"phi", "left"},
                 {"s_grid", "0.015625:64:13"}, {"out", "out"}, {"format", "csv"}, {"seed", 1}};
  json ok = {{"command", "wns"}, {"code_version", code_version()}, {"config", config}, {"epsilon", 0.25},
             {"depth", 12}, {"ok", true},
             {"wns_table", json::array({{{"n", 2}, {"s", 1.0}, {"lhs", 0.1}, {"fnorm", 1.0}, {"ratio", 0.1}}})}};
  CHECK(validate_summary(ok, schema).empty());
  json missing = ok;
  missing.erase("config");
  CHECK(validate_summary(missing, schema).find("config") != std::string::npos);
  json wrong = ok;
  wrong["wns_table"][0]["n"] = "two";
  CHECK_FALSE(validate_summary(wrong, schema).empty());
  json badcfg = ok;
  badcfg["config"].erase("seed");
  CHECK_FALSE(validate_summary(badcfg, schema).empty());
  CHECK(std::string(code_version()) == MWLAB_VERSION);
}

}
