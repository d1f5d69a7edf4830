#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "coagflow/scenario.hpp"

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(COAGFLOW_CLI_PATH) + " " + args +
                          " > /tmp/coagflow_cli_out.txt 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string last_output() {
  std::ifstream in("/tmp/coagflow_cli_out.txt");
  std::string all, line;
  while (std::getline(in, line)) all += line + "\n";
  return all;
}

}  // namespace

TEST_CASE("flow probe prints the canonical residence bound") {
  CHECK(run_cli("flow-probe") == 0);
  CHECK(last_output().find("t0 = 1.1") != std::string::npos);
}

TEST_CASE("malformed configs exit with code 2") {
  std::ofstream("/tmp/coagflow_bad.json") << "{ \"schema_version\": 1 ";
  CHECK(run_cli("det-solve --scenario /tmp/coagflow_bad.json") == 2);

  std::ofstream("/tmp/coagflow_nokernel.json") << R"({
    "schema_version": 1,
    "domain": {"dimension": 1, "length": 1.0},
    "velocity": {"name": "constant", "params": [1.0]},
    "delocalisation": {"form": "cells", "cells": 8},
    "horizon": 1.0,
    "numerics": {"dt": 0.01, "grid_cells": 8}
  })";
  CHECK(run_cli("det-solve --scenario /tmp/coagflow_nokernel.json") == 2);
  CHECK(last_output().find("kernel") != std::string::npos);
}

TEST_CASE("det-solve writes its artifacts") {
  std::ofstream("/tmp/coagflow_plug.json")
      << coagflow::plugflow_scenario_json(64);
  std::filesystem::remove_all("/tmp/coagflow_cli_run");
  CHECK(run_cli("det-solve --scenario /tmp/coagflow_plug.json "
                "--out /tmp/coagflow_cli_run --knots 0.5,1.0") == 0);
  CHECK(std::filesystem::exists("/tmp/coagflow_cli_run/pairings.csv"));
  CHECK(std::filesystem::exists("/tmp/coagflow_cli_run/manifest.json"));
  CHECK(std::filesystem::exists("/tmp/coagflow_cli_run/plot.gp"));
  CHECK(std::filesystem::exists("/tmp/coagflow_cli_run/traj_index.txt"));
  std::filesystem::remove_all("/tmp/coagflow_cli_run");
}

TEST_CASE("unknown options fail parsing") {
  CHECK(run_cli("det-solve --no-such-flag") != 0);
}
