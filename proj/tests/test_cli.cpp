#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_command(const std::string& cmd) {
  CommandResult result;
  FILE* pipe = popen((cmd + " 2>/dev/null").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0)
    result.output.append(buf.data(), n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

const std::string kBin = CAVITY_TN_BIN;

}  // namespace

TEST_CASE("cli gen writes a parseable instance") {
  CommandResult r = run_command(kBin + " gen --n 12 --m 30 --k 3 --seed 4");
  CHECK(r.exit_code == 0);
  CHECK(r.output.rfind("p cnf 12 30", 0) == 0);

  CommandResult again = run_command(kBin + " gen --n 12 --m 30 --k 3 --seed 4");
  CHECK(again.output == r.output);
}

TEST_CASE("cli solve exit codes") {
  const std::string dir = "/tmp/cavitytn_cli_test";
  run_command("mkdir -p " + dir);

  {
    std::ofstream f(dir + "/unit.cnf");
    f << "p cnf 1 1\n1 0\n";
  }
  CommandResult sat = run_command(kBin + " solve " + dir + "/unit.cnf --engine bp");
  CHECK(sat.exit_code == 0);
  CHECK(sat.output.find("\"SAT\"") != std::string::npos);
  CHECK(sat.output.find("\"1\": true") != std::string::npos);

  {
    std::ofstream f(dir + "/unsat.cnf");
    f << "p cnf 1 2\n1 0\n-1 0\n";
  }
  CommandResult unsat = run_command(kBin + " solve " + dir + "/unsat.cnf --engine bp");
  CHECK(unsat.exit_code == 3);

  {
    std::ofstream f(dir + "/bad.cnf");
    f << "p cnf 1 1\n2 0\n";
  }
  CommandResult bad = run_command(kBin + " solve " + dir + "/bad.cnf --engine bp");
  CHECK(bad.exit_code == 1);
}

TEST_CASE("cli solve reads stdin") {
  CommandResult r =
      run_command("printf 'p cnf 2 1\\n1 2 0\\n' | " + kBin + " solve - --engine walksat");
  CHECK(r.exit_code == 0);
}

TEST_CASE("cli sweep emits the pinned CSV schema and is deterministic") {
  const std::string cmd = kBin +
                          " sweep --n 20 --alphas 1.0 --instances 2 --engines walksat "
                          "--flips 10000 --seed 6 --workers 2";
  CommandResult a = run_command(cmd);
  CHECK(a.exit_code == 0);
  CHECK(a.output.find("engine,alpha,n,successes,total,fraction,mean_wall_ms") !=
        std::string::npos);
  // Identical rows excluding the timing column.
  auto strip_timing = [](const std::string& csv) {
    std::string out;
    size_t pos = 0;
    while (pos < csv.size()) {
      size_t eol = csv.find('\n', pos);
      if (eol == std::string::npos) eol = csv.size();
      std::string line = csv.substr(pos, eol - pos);
      const size_t last_comma = line.rfind(',');
      if (last_comma != std::string::npos && line.find("engine,") != 0 &&
          line.find('#') != 0)
        line = line.substr(0, last_comma);
      out += line + "\n";
      pos = eol + 1;
    }
    return out;
  };
  CommandResult b = run_command(cmd);
  CHECK(strip_timing(a.output) == strip_timing(b.output));
}

TEST_CASE("cli validate runs at small scale") {
  CommandResult r = run_command(kBin +
                                " validate --n 8 --alphas 1.0 --instances 2 --seed 3 "
                                "--workers 2");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("alpha,n,seed") != std::string::npos);
}

TEST_CASE("cli bench lattice smoke") {
  CommandResult r = run_command(kBin + " bench --shape lattice --L 6 --sweeps 1");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("ms_per_sweep") != std::string::npos);
}
