#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "netshock/cli.hpp"

namespace fs = std::filesystem;
using netshock::cli::run;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("netshock_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help and usage errors") {
    CHECK(call({"--help"}).code == 0);
    const auto bad = call({"frobnicate"});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("error: usage:") != std::string::npos);
    const auto noseed = call({"simulate", "--output", scratch("noseed").string()});
    CHECK(noseed.code == 2);
  }

  TEST_CASE("exit codes per category") {
    CHECK(netshock::cli::exit_code_for("usage") == 2);
    CHECK(netshock::cli::exit_code_for("io") == 3);
    CHECK(netshock::cli::exit_code_for("parse") == 4);
    CHECK(netshock::cli::exit_code_for("singular") == 10);
  }

  TEST_CASE("missing input is an io error") {
    const auto dir = scratch("missing");
    const auto r = call({"ingest", "--input", (dir / "nothing").string(), "--output", (dir / "o").string()});
    CHECK(r.code == 3);
    CHECK(r.err.rfind("error: io:", 0) == 0);
  }

  TEST_CASE("malformed transactions fail with a parse error in strict mode") {
    const auto dir = scratch("malformed");
    std::ofstream(dir / "firms.csv") << "firm_id,rayon_id,province_id,conflict_flag\nF1,R1,P1,0\nF2,R2,P1,0\n";
    std::ofstream(dir / "transactions.csv")
        << "date,sender_firm_id,receiver_firm_id,sender_rayon_id,receiver_rayon_id,weight_kg\n"
        << "2013-05-02,F1,F2,R1,R2,-5\n";
    std::ofstream(dir / "accounting.csv") << "firm_id,year,sales,profits,total_costs\n";
    const auto r = call({"ingest", "--input", dir.string(), "--output", (dir / "o").string()});
    CHECK(r.code == 4);
    CHECK(r.err.find("line 2") != std::string::npos);
    const auto lenient =
        call({"ingest", "--lenient", "--input", dir.string(), "--output", (dir / "o2").string()});
    CHECK(lenient.code == 0);
  }

  TEST_CASE("small pipeline writes the expected files") {
    const auto dir = scratch("pipeline");
    std::ofstream(dir / "small.cfg") << "n_firms = 80\n";
    const auto cfg = (dir / "small.cfg").string();
    auto step = [&](std::vector<std::string> args) {
      args.insert(args.end(), {"--config", cfg});
      const auto r = call(args);
      INFO(r.err);
      REQUIRE(r.code == 0);
    };
    step({"simulate", "--seed", "3", "--output", (dir / "raw").string()});
    step({"ingest", "--input", (dir / "raw").string(), "--output", (dir / "clean").string()});
    step({"network", "--input", (dir / "clean").string(), "--output", (dir / "net").string()});
    step({"counterfactual", "--input", (dir / "clean").string(), "--output", (dir / "cf").string()});
    step({"did", "--spec", "propagation-both-degrees", "--input", (dir / "clean").string(), "--output",
          (dir / "did").string()});

    CHECK(fs::exists(dir / "net" / "io_2013.csv"));
    const auto scen = slurp(dir / "cf" / "scenarios.csv");
    CHECK(scen.find("destruction,median,") != std::string::npos);
    const auto res = slurp(dir / "did" / "results.csv");
    CHECK(res.find("Conflict x Post,") != std::string::npos);

    const auto manifest = nlohmann::json::parse(slurp(dir / "did" / "manifest.json"));
    CHECK(manifest["command"] == "did");
    CHECK(manifest.contains("runtime"));
    CHECK(manifest["config"]["n_firms"] == "80");
  }
}
