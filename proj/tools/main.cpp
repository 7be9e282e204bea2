#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "cavitytn/exact.hpp"
#include "cavitytn/experiment.hpp"
#include "cavitytn/rng.hpp"
#include "cavitytn/solver.hpp"
#include "cavitytn/sp.hpp"
#include "cavitytn/tfg.hpp"
#include "cavitytn/vectorized.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace cavitytn;

CnfInstance read_instance(const std::string& path) {
  if (path == "-") return parse_dimacs(std::cin);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_dimacs(in);
}

void write_output(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << content;
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::kSat:
      return "SAT";
    case SolveStatus::kUnknown:
      return "UNKNOWN";
    case SolveStatus::kContradiction:
      return "CONTRADICTION";
  }
  return "?";
}

int status_exit_code(SolveStatus s) {
  switch (s) {
    case SolveStatus::kSat:
      return 0;
    case SolveStatus::kUnknown:
      return 2;
    case SolveStatus::kContradiction:
      return 3;
  }
  return 2;
}

json solve_result_json(const SolveResult& result, const CnfInstance& instance) {
  json j;
  j["status"] = status_name(result.status);
  j["decimation_steps"] = result.decimation_steps;
  j["walksat_flips_used"] = result.walksat_flips_used;
  if (result.sat()) {
    json assignment = json::object();
    for (int v = 0; v < instance.num_vars; ++v)
      assignment[std::to_string(v + 1)] = static_cast<bool>(result.assignment.values[v]);
    j["assignment"] = std::move(assignment);
    j["energy"] = energy(instance, result.assignment);
  }
  json trace = json::array();
  for (const DecimationStep& s : result.trace) {
    json step;
    step["var"] = s.var + 1;
    step["value"] = s.value;
    step["source"] =
        s.source == DecimationStep::Source::kEngine ? "engine" : "unit-propagation";
    step["bias"] = s.bias;
    step["engine_iterations"] = s.engine_iterations;
    trace.push_back(std::move(step));
  }
  j["trace"] = std::move(trace);
  return j;
}

std::vector<Engine> parse_engines(const std::vector<std::string>& names) {
  std::vector<Engine> engines;
  for (const std::string& s : names) {
    if (s == "bp")
      engines.push_back(Engine::kBp);
    else if (s == "sp")
      engines.push_back(Engine::kSp);
    else if (s == "walksat")
      engines.push_back(Engine::kWalksat);
    else if (s == "sp-walksat")
      engines.push_back(Engine::kSpWalksat);
    else
      throw CLI::ValidationError("unknown engine: " + s);
  }
  return engines;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor-network message passing for k-SAT: BP, SP, decimation, WalkSat"};
  app.require_subcommand(1);

  // gen -------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "Generate a random k-SAT instance (DIMACS)");
  int gen_n = 100, gen_m = -1, gen_k = 3;
  double gen_alpha = -1.0;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--n", gen_n, "number of variables");
  gen->add_option("--m", gen_m, "number of clauses");
  gen->add_option("--alpha", gen_alpha, "clause density (used when --m is absent)");
  gen->add_option("--k", gen_k, "literals per clause");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out,-o", gen_out, "output path (default stdout)");

  // solve -----------------------------------------------------------------
  auto* solve = app.add_subcommand("solve", "Solve a DIMACS instance");
  std::string solve_path = "-";
  std::string solve_engine = "sp-walksat";
  double solve_tol = 1e-3, solve_bias_threshold = 1e-3, solve_mixing = 0.5;
  int solve_max_iters = 1000;
  std::int64_t solve_flips = 1000000;
  std::uint64_t solve_seed = 1;
  bool solve_cold = false, solve_no_unit_prop = false, solve_normalized_biases = false;
  solve->add_option("path", solve_path, "DIMACS path or - for stdin");
  solve->add_option("--engine", solve_engine, "bp|sp|walksat|sp-walksat");
  solve->add_option("--tol", solve_tol, "message-passing tolerance");
  solve->add_option("--max-iters", solve_max_iters, "message-passing iteration cap");
  solve->add_option("--bias-threshold", solve_bias_threshold, "SP decimation stop");
  solve->add_option("--flips", solve_flips, "WalkSat flip budget");
  solve->add_option("--mixing", solve_mixing, "WalkSat random-walk probability");
  solve->add_option("--seed", solve_seed, "run seed");
  solve->add_flag("--cold-start", solve_cold, "re-randomize messages each decimation step");
  solve->add_flag("--no-unit-prop", solve_no_unit_prop, "disable unit propagation");
  solve->add_flag("--normalized-biases", solve_normalized_biases,
                  "divide SP biases by p0+p1+pfree");

  // validate ---------------------------------------------------------------
  auto* validate = app.add_subcommand("validate", "Compare BP against the exact oracle");
  ValidateSpec vspec;
  vspec.alphas = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0};
  std::string validate_out;
  validate->add_option("--n", vspec.n, "variables (enumeration limit applies)");
  validate->add_option("--alphas", vspec.alphas, "clause densities")->expected(-1);
  validate->add_option("--instances", vspec.instances_per_point, "instances per point");
  validate->add_option("--seed", vspec.seed, "base seed");
  validate->add_option("--tol", vspec.bp.tolerance, "BP tolerance");
  validate->add_option("--max-iters", vspec.bp.max_iterations, "BP iteration cap");
  validate->add_option("--workers", vspec.workers, "parallel workers");
  validate->add_option("--out,-o", validate_out, "output path (default stdout)");

  // sweep -------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "Success-fraction sweep over clause density");
  SweepSpec sspec;
  sspec.alphas = {3.8, 4.0, 4.1, 4.2};
  std::vector<std::string> sweep_engines{"bp", "walksat", "sp-walksat"};
  std::string sweep_out, sweep_format = "csv";
  sweep->add_option("--n", sspec.n, "variables");
  sweep->add_option("--k", sspec.k, "literals per clause");
  sweep->add_option("--alphas", sspec.alphas, "clause densities")->expected(-1);
  sweep->add_option("--instances", sspec.instances_per_point, "instances per point");
  sweep->add_option("--engines", sweep_engines, "bp sp walksat sp-walksat")->expected(-1);
  sweep->add_option("--seed", sspec.seed, "base seed");
  sweep->add_option("--tol", sspec.solver.bp.tolerance, "message-passing tolerance");
  sweep->add_option("--max-iters", sspec.solver.bp.max_iterations, "iteration cap");
  sweep->add_option("--bias-threshold", sspec.solver.bias_threshold, "SP decimation stop");
  sweep->add_option("--flips", sspec.solver.walksat_flips, "WalkSat flip budget");
  sweep->add_option("--mixing", sspec.mixing_values,
                    "WalkSat mixing value(s); several = best-of")
      ->expected(-1);
  sweep->add_option("--workers", sspec.workers, "parallel workers");
  sweep->add_option("--format", sweep_format, "csv|json");
  sweep->add_option("--out,-o", sweep_out, "output path (default stdout)");

  // bench -------------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "Time message-passing sweeps");
  std::string bench_shape = "lattice", bench_engine = "bp", bench_out;
  int bench_side = 50, bench_n = 100000, bench_sweeps = 3;
  double bench_alpha = 4.1;
  std::uint64_t bench_seed = 1;
  bench->add_option("--shape", bench_shape, "lattice|ksat");
  bench->add_option("--L", bench_side, "lattice side length");
  bench->add_option("--n", bench_n, "k-SAT variables");
  bench->add_option("--alpha", bench_alpha, "k-SAT clause density");
  bench->add_option("--sweeps", bench_sweeps, "timed sweeps");
  bench->add_option("--engine", bench_engine, "bp (vectorized) | sp (direct)");
  bench->add_option("--seed", bench_seed, "seed");
  bench->add_option("--out,-o", bench_out, "output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      if (gen_m < 0) {
        if (gen_alpha < 0) throw std::runtime_error("need --m or --alpha");
        gen_m = static_cast<int>(std::lround(gen_alpha * gen_n));
      }
      write_output(gen_out, write_dimacs(random_ksat(gen_n, gen_m, gen_k, gen_seed)));
      return 0;
    }

    if (*solve) {
      CnfInstance inst = read_instance(solve_path);
      DecimationConfig cfg;
      cfg.bp.tolerance = solve_tol;
      cfg.bp.max_iterations = solve_max_iters;
      cfg.bias_threshold = solve_bias_threshold;
      cfg.walksat_flips = solve_flips;
      cfg.walksat_mixing = solve_mixing;
      cfg.seed = solve_seed;
      cfg.bp.seed = solve_seed;
      cfg.warm_start = !solve_cold;
      cfg.normalized_biases = solve_normalized_biases;
      if (solve_no_unit_prop) cfg.unit_propagation = false;

      SolveResult result;
      if (solve_engine == "bp") {
        cfg.engine = SolverEngine::kBp;
        cfg.walksat_on_residual = false;
        result = decimate(inst, cfg);
      } else if (solve_engine == "sp") {
        cfg.engine = SolverEngine::kSp;
        cfg.walksat_on_residual = false;
        result = decimate(inst, cfg);
      } else if (solve_engine == "walksat") {
        result = walksat(inst, solve_flips, solve_mixing, solve_seed);
      } else if (solve_engine == "sp-walksat") {
        result = solve_pipeline(inst, cfg);
      } else {
        throw std::runtime_error("unknown engine: " + solve_engine);
      }
      json j = solve_result_json(result, inst);
      j["engine"] = solve_engine;
      j["seed"] = solve_seed;
      json jcfg;
      jcfg["tol"] = solve_tol;
      jcfg["max_iters"] = solve_max_iters;
      jcfg["bias_threshold"] = solve_bias_threshold;
      jcfg["flips"] = solve_flips;
      jcfg["mixing"] = solve_mixing;
      jcfg["warm_start"] = !solve_cold;
      j["config"] = std::move(jcfg);
      std::cout << j.dump(2) << "\n";
      return status_exit_code(result.status);
    }

    if (*validate) {
      write_output(validate_out, validate_csv(vspec, run_validate(vspec)));
      return 0;
    }

    if (*sweep) {
      sspec.engines = parse_engines(sweep_engines);
      if (sspec.mixing_values.empty()) sspec.mixing_values = {sspec.solver.walksat_mixing};
      sspec.solver.walksat_mixing = sspec.mixing_values.front();
      const SweepOutput out = run_sweep(sspec);
      if (sweep_format == "json") {
        json j;
        json cfg;
        cfg["n"] = sspec.n;
        cfg["k"] = sspec.k;
        cfg["alphas"] = sspec.alphas;
        cfg["instances"] = sspec.instances_per_point;
        cfg["seed"] = sspec.seed;
        cfg["tol"] = sspec.solver.bp.tolerance;
        cfg["max_iters"] = sspec.solver.bp.max_iterations;
        cfg["flips"] = sspec.solver.walksat_flips;
        cfg["mixing"] = sspec.mixing_values;
        cfg["bias_threshold"] = sspec.solver.bias_threshold;
        j["config"] = std::move(cfg);
        json records = json::array();
        for (const SweepRecord& r : out.records) {
          json rec;
          rec["engine"] = engine_name(r.engine);
          rec["alpha"] = r.alpha;
          rec["instance"] = r.instance_index;
          rec["seed"] = r.seed;
          rec["status"] = status_name(r.status);
          rec["wall_ms"] = r.wall_ms;
          rec["decimation_steps"] = r.decimation_steps;
          records.push_back(std::move(rec));
        }
        j["records"] = std::move(records);
        json aggs = json::array();
        for (const SweepAggregate& a : out.aggregates) {
          json agg;
          agg["engine"] = a.engine_label;
          agg["alpha"] = a.alpha;
          agg["n"] = a.n;
          agg["successes"] = a.successes;
          agg["total"] = a.total;
          agg["fraction"] = a.fraction;
          agg["mean_wall_ms"] = a.mean_wall_ms;
          aggs.push_back(std::move(agg));
        }
        j["aggregates"] = std::move(aggs);
        write_output(sweep_out, j.dump(2) + "\n");
      } else {
        write_output(sweep_out, sweep_csv(sspec, out));
      }
      return 0;
    }

    if (*bench) {
      json j;
      j["shape"] = bench_shape;
      j["engine"] = bench_engine;
      j["sweeps"] = bench_sweeps;
      j["seed"] = bench_seed;
      double total_ms = 0.0;
      if (bench_shape == "lattice") {
        j["L"] = bench_side;
        TensorFactorGraph g = build_cubic_lattice_tfg(bench_side, 2, bench_seed);
        VectorizedBp engine(g);
        BpConfig cfg;
        cfg.seed = bench_seed;
        engine.load(init_environments(g, cfg));
        for (int s = 0; s < bench_sweeps; ++s) {
          const auto t0 = std::chrono::steady_clock::now();
          engine.sweep();
          total_ms += std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        }
      } else if (bench_shape == "ksat") {
        j["n"] = bench_n;
        j["alpha"] = bench_alpha;
        const int m = static_cast<int>(std::lround(bench_alpha * bench_n));
        CnfInstance inst = random_ksat(bench_n, m, 3, bench_seed);
        if (bench_engine == "sp") {
          SpGraph g = build_sp_graph(inst);
          BpConfig cfg;
          cfg.seed = bench_seed;
          cfg.tolerance = 1e-300;  // time full sweeps
          cfg.max_iterations = 1;
          SpState state = init_sp_state(g, cfg);
          for (int s = 0; s < bench_sweeps; ++s) {
            const auto t0 = std::chrono::steady_clock::now();
            SpReport rep = run_sp(g, inst, cfg, SpMode::kDirect, &state);
            state = std::move(rep.state);
            total_ms += std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
          }
        } else {
          TensorFactorGraph g = build_tfg(inst);
          VectorizedBp engine(g);
          BpConfig cfg;
          cfg.seed = bench_seed;
          engine.load(init_environments(g, cfg));
          for (int s = 0; s < bench_sweeps; ++s) {
            const auto t0 = std::chrono::steady_clock::now();
            engine.sweep();
            total_ms += std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
          }
        }
      } else {
        throw std::runtime_error("unknown bench shape: " + bench_shape);
      }
      j["ms_per_sweep"] = total_ms / bench_sweeps;
      write_output(bench_out, j.dump(2) + "\n");
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
