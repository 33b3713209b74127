#include "acceptance/suite.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  acceptance::Options opt;
  std::vector<int> only;
  bool as_json = false;
  app.add_option("--seed", opt.seed, "seed for the randomized criteria");
  app.add_option("--bits", opt.bits, "extended precision mantissa bits")->check(CLI::Range(64u, 4096u));
  app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, acceptance::kCriteria));
  app.add_flag("--json", as_json, "print a JSON array instead of lines");
  CLI11_PARSE(app, argc, argv);

  bool ok = true;
  nlohmann::json out = nlohmann::json::array();
  for (int id = 1; id <= acceptance::kCriteria; ++id) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    auto c = acceptance::run(id, opt);
    ok = ok && c.pass;
    if (as_json)
      out.push_back(acceptance::to_json(c));
    else
      std::cout << acceptance::format_line(c) << std::endl;
  }
  if (as_json) std::cout << out.dump(2) << "\n";
  return ok ? 0 : 1;
}
